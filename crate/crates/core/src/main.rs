fn main() {
    std::process::exit(tactor::cli::run(std::env::args_os()));
}

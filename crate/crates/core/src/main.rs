fn main() {
    std::process::exit(cachepir::cli::run(std::env::args_os()));
}

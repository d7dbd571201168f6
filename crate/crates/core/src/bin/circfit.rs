fn main() {
    std::process::exit(circfit::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(varplace::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(liplab::cli::run(std::env::args_os()));
}

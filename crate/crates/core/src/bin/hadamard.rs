fn main() {
    std::process::exit(hadamard::cli::run(std::env::args_os()));
}

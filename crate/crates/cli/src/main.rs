fn main() {
    std::process::exit(salmetric_cli::run(std::env::args_os()));
}

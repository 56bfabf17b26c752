fn main() {
    std::process::exit(fracopt_cli::run(std::env::args_os()));
}

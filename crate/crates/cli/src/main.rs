fn main() {
    std::process::exit(lyapdisp_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(qpm_cli::run(std::env::args_os()));
}

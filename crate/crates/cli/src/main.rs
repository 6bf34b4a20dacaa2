fn main() {
    std::process::exit(ptfc_cli::run(std::env::args_os()));
}

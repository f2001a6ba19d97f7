fn main() {
    std::process::exit(evrep_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(sctsa_cli::run_from(std::env::args_os()));
}

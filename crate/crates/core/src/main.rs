fn main() {
    std::process::exit(equisym::cli::run_cli(std::env::args_os()));
}

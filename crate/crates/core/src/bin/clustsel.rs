fn main() {
    std::process::exit(clustsel::cli::run_cli(std::env::args_os()));
}

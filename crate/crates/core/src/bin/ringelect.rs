fn main() {
    std::process::exit(ringelect::cli::run_command(std::env::args_os()));
}

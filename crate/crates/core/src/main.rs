fn main() {
    std::process::exit(pvtwin::cli::run_command(std::env::args_os()));
}

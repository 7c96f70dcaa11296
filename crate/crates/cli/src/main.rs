fn main() {
    std::process::exit(zdsc_cli::run_main(std::env::args_os()));
}

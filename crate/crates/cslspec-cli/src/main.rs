fn main() {
    std::process::exit(cslspec_cli::run(std::env::args_os()));
}

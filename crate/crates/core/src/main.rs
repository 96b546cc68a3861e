fn main() {
    std::process::exit(rttroute::cli::main_with_args(std::env::args_os()));
}

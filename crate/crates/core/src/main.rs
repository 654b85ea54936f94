fn main() {
    std::process::exit(cuspidal::cli::main_with(std::env::args_os()));
}

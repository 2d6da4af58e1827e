fn main() {
    let code = multifract::cli::run_command(std::env::args_os());
    std::process::exit(code);
}

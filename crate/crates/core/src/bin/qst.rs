fn main() {
    std::process::exit(qst_core::cli::main_with_args(std::env::args_os()));
}

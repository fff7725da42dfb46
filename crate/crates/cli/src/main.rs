fn main() {
    std::process::exit(tabqa_cli::main_with(std::env::args_os()));
}

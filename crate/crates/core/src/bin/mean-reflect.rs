fn main() {
    std::process::exit(mean_reflect::cli::main_with(std::env::args_os()));
}

fn main() {
    std::process::exit(delta_bounds::cli::main_with_args(std::env::args_os()));
}

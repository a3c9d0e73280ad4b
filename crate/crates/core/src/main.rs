fn main() {
    std::process::exit(point_interaction::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(cube_sections::cli::run(std::env::args_os()));
}

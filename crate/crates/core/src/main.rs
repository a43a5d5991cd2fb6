fn main() {
    std::process::exit(latentdrive::cli::main_with(std::env::args_os()));
}

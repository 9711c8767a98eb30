fn main() {
    std::process::exit(nlell::main_with(std::env::args_os()));
}

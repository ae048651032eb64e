fn main() {
    std::process::exit(titlerag::run_cli());
}

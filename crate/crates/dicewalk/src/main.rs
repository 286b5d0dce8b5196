fn main() {
    std::process::exit(dicewalk::cli::run_cli());
}

fn main() {
    std::process::exit(qgraph::cli::main_with_args(std::env::args_os()));
}

fn main() -> std::process::ExitCode {
    gttf::cli::main_entry()
}

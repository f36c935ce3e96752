fn main() -> std::process::ExitCode {
    csmooth::cli::main_entry()
}

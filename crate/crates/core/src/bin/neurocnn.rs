fn main() -> std::process::ExitCode {
    neurocnn::cli::main()
}

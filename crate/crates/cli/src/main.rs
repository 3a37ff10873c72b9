fn main() {
    // Placeholder; subcommands land with the CLI implementation.
}

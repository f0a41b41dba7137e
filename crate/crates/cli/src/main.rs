fn main() {
    std::process::exit(snowflake_embed_cli::run(std::env::args_os()));
}

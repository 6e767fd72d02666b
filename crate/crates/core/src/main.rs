fn main() {
    std::process::exit(latent_bias::cli::run(std::env::args_os()));
}

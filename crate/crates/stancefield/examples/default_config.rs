//! Prints the default configuration as TOML.

fn main() {
    print!("{}", stancefield::PipelineConfig::default().to_toml().expect("defaults serialize"));
}

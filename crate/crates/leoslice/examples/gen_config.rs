fn main() {
    let config = leoslice::simkit::ScenarioConfig::reference();
    print!("{}", config.to_toml());
}

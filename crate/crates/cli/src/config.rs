use pwlab::scenarios::{KickedConfig, MeasurementConfig, SternGerlachConfig, TorusConfig, TwoSlitConfig};
use pwlab::{Error, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

pub const SCENARIOS: [&str; 5] = ["torus", "measurement", "stern_gerlach", "two_slit", "kicked_relaxation"];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub heatmaps: bool,
}

#[derive(Debug, Clone)]
pub enum ScenarioParams {
    Torus(TorusConfig),
    Measurement(MeasurementConfig),
    SternGerlach(SternGerlachConfig),
    TwoSlit(TwoSlitConfig),
    Kicked(KickedConfig),
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioParams::Torus(c) => c.validate(),
            ScenarioParams::Measurement(c) => c.validate(),
            ScenarioParams::SternGerlach(c) => c.validate(),
            ScenarioParams::TwoSlit(c) => c.validate(),
            ScenarioParams::Kicked(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub output: OutputSpec,
    pub params: ScenarioParams,
    pub sha256: String,
}

#[derive(Deserialize)]
struct Header {
    scenario: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    output: OutputSpec,
    #[serde(flatten)]
    sections: toml::Table,
}

fn section<T: for<'de> Deserialize<'de>>(sections: &toml::Table, name: &str) -> Result<T> {
    let value = sections
        .get(name)
        .ok_or_else(|| Error::Config(format!("missing [{name}] section")))?;
    value
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("[{name}]: {}", e.message())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let header: Header = toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))?;
    let _ = header.description;
    let name = header.scenario.as_str();
    if !SCENARIOS.contains(&name) {
        return Err(Error::Config(format!("unknown scenario {name:?}")));
    }
    if let Some(extra) = header.sections.keys().find(|k| k.as_str() != name) {
        return Err(Error::Config(format!("unexpected section [{extra}] for scenario {name}")));
    }
    let s = &header.sections;
    let params = match name {
        "torus" => ScenarioParams::Torus(section(s, name)?),
        "measurement" => ScenarioParams::Measurement(section(s, name)?),
        "stern_gerlach" => ScenarioParams::SternGerlach(section(s, name)?),
        "two_slit" => ScenarioParams::TwoSlit(section(s, name)?),
        _ => ScenarioParams::Kicked(section(s, name)?),
    };
    params.validate()?;
    Ok(RunConfig {
        scenario: name.to_string(),
        seed: header.seed.unwrap_or(0),
        output: header.output,
        params,
        sha256: sha256_hex(text.as_bytes()),
    })
}

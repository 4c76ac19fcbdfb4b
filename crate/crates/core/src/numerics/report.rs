use serde::{Deserialize, Serialize};

/// One named residual compared against its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Outcome of a numerical check.
///
/// `items` decide the verdict; `notes` are diagnostics that never affect it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<CheckItem>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an item that passes iff `residual <= threshold` (NaN fails).
    pub fn push(&mut self, name: impl Into<String>, residual: f64, threshold: f64) -> bool {
        let pass = residual <= threshold;
        self.items.push(CheckItem { name: name.into(), residual, threshold, pass });
        pass
    }

    /// Adds an item whose verdict was decided elsewhere.
    pub fn push_verdict(&mut self, name: impl Into<String>, pass: bool) {
        self.items.push(CheckItem {
            name: name.into(),
            residual: if pass { 0.0 } else { 1.0 },
            threshold: 0.5,
            pass,
        });
    }

    pub fn note(&mut self, name: impl Into<String>, residual: f64, threshold: f64) {
        let pass = residual <= threshold;
        self.notes.push(CheckItem { name: name.into(), residual, threshold, pass });
    }

    pub fn overall_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().chain(&self.notes).find(|i| i.name == name)
    }

    /// Residual of the named item; panics if absent.
    pub fn residual(&self, name: &str) -> f64 {
        self.item(name).unwrap_or_else(|| panic!("no item named {name}")).residual
    }

    pub fn passes(&self, name: &str) -> bool {
        self.item(name).unwrap_or_else(|| panic!("no item named {name}")).pass
    }

    /// Appends all items of `other`, prefixing their names.
    pub fn merge(&mut self, prefix: &str, other: CheckReport) {
        let rename = |mut i: CheckItem| {
            if !prefix.is_empty() {
                i.name = format!("{prefix}.{}", i.name);
            }
            i
        };
        self.items.extend(other.items.into_iter().map(rename));
        self.notes.extend(other.notes.into_iter().map(rename));
    }

    pub fn max_residual(&self) -> f64 {
        self.items.iter().map(|i| i.residual).fold(0.0, f64::max)
    }
}

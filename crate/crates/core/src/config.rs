//! Scheme configuration: per-scheme defaults overlaid with a TOML document.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    KandesFree,
    KandesInteracting,
    HelmBarrier,
    HalkyardOam,
    HalkyardTwoSpin,
    StevensonConstVelocity,
    StevensonSinusoidal,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::KandesFree,
        SchemeId::KandesInteracting,
        SchemeId::HelmBarrier,
        SchemeId::HalkyardOam,
        SchemeId::HalkyardTwoSpin,
        SchemeId::StevensonConstVelocity,
        SchemeId::StevensonSinusoidal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::KandesFree => "kandes_free",
            SchemeId::KandesInteracting => "kandes_interacting",
            SchemeId::HelmBarrier => "helm_barrier",
            SchemeId::HalkyardOam => "halkyard_oam",
            SchemeId::HalkyardTwoSpin => "halkyard_two_spin",
            SchemeId::StevensonConstVelocity => "stevenson_const_velocity",
            SchemeId::StevensonSinusoidal => "stevenson_sinusoidal",
        }
    }

    pub fn is_spinor(&self) -> bool {
        matches!(
            self,
            SchemeId::HalkyardTwoSpin | SchemeId::StevensonConstVelocity | SchemeId::StevensonSinusoidal
        )
    }

    pub fn is_kandes_family(&self) -> bool {
        matches!(
            self,
            SchemeId::KandesFree | SchemeId::KandesInteracting | SchemeId::HelmBarrier
        )
    }

    pub fn is_stevenson(&self) -> bool {
        matches!(self, SchemeId::StevensonConstVelocity | SchemeId::StevensonSinusoidal)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| {
            let known: Vec<_> = SchemeId::ALL.iter().map(|id| id.as_str()).collect();
            Error::config(format!("unknown scheme `{s}` (known: {})", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Largest allowed step; shrunk so that snapshots fall on steps.
    pub dt: f64,
    /// Run length; scheme default when absent (3 T_c, the transport period, …).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    pub save_intervals: usize,
    pub interaction: f64,
    /// Rotation rate at which derivatives are taken.
    pub omega0: f64,
    /// Central-difference step in Ω.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub sigma: f64,
    pub k_kick: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    /// Integrated strength; calibrated to `target_reflection` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Gaussian width in rad; 8Δθ when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    pub center: f64,
    /// Switch-on time; one collision time when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_time: Option<f64>,
    pub target_reflection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OamConfig {
    pub ell: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub trap_omega: f64,
    /// Time for one full loop of the trap minimum.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    /// Time of the recombination pulse; the run end when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

/// Fully specified scheme: every field has a value after defaults are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: SchemeId,
    pub grid: GridConfig,
    pub evolution: EvolutionConfig,
    pub packet: PacketConfig,
    pub barrier: BarrierConfig,
    pub oam: OamConfig,
    pub transport: TransportConfig,
    pub pulse: PulseConfig,
}

impl SchemeConfig {
    /// Defaults reproducing the corresponding figure parameters.
    pub fn defaults(scheme: SchemeId) -> Self {
        let (grid, dt, intervals) = match scheme {
            SchemeId::KandesFree | SchemeId::KandesInteracting | SchemeId::HelmBarrier => {
                // 201 = 3 · 67 puts every collision time on a snapshot.
                (
                    GridConfig {
                        n_points: 2048,
                        radius: 1.0,
                    },
                    1e-4,
                    201,
                )
            }
            SchemeId::HalkyardOam | SchemeId::HalkyardTwoSpin => (
                GridConfig {
                    n_points: 1024,
                    radius: 1.0,
                },
                1e-3,
                200,
            ),
            SchemeId::StevensonConstVelocity | SchemeId::StevensonSinusoidal => (
                GridConfig {
                    n_points: 1024,
                    radius: 5.0,
                },
                1e-3,
                200,
            ),
        };
        let interaction = if scheme == SchemeId::KandesInteracting {
            0.2
        } else {
            0.0
        };
        let t_final = match scheme {
            SchemeId::HalkyardOam | SchemeId::HalkyardTwoSpin => Some(1.0),
            _ => None,
        };
        SchemeConfig {
            scheme,
            grid,
            evolution: EvolutionConfig {
                dt,
                t_final,
                save_intervals: intervals,
                interaction,
                omega0: 0.0,
                delta: 1e-3,
            },
            packet: PacketConfig {
                sigma: 0.5,
                k_kick: 20.0,
            },
            barrier: BarrierConfig {
                amplitude: None,
                width: None,
                center: 0.0,
                on_time: None,
                target_reflection: 0.5,
            },
            oam: OamConfig { ell: 1 },
            transport: TransportConfig {
                trap_omega: 1.0,
                period: 5.0,
            },
            pulse: PulseConfig { time: None },
        }
    }

    /// Parses a TOML document. Only `scheme` is required; other keys
    /// override that scheme's defaults and unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(format!("malformed config: {e}")))?;
        Self::from_table(table)
    }

    pub fn from_table(user: Table) -> Result<Self> {
        let id = match user.get("scheme") {
            Some(Value::String(s)) => s.parse::<SchemeId>()?,
            Some(other) => return Err(Error::config(format!("`scheme` must be a string, got {other}"))),
            None => return Err(Error::config("config is missing `scheme`")),
        };
        let mut merged = Self::defaults(id).to_table();
        merge(&mut merged, user);
        let cfg: SchemeConfig = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_table(&self) -> Table {
        match Value::try_from(self).expect("config serializes") {
            Value::Table(t) => t,
            _ => unreachable!("struct serializes to a table"),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Returns a copy with the dotted `key` (e.g. `evolution.interaction`)
    /// set to `value`, parsed as a TOML value.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let parsed: Value = format!("v = {value}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(value.to_string()));
        let mut table = self.to_table();
        let mut cursor = &mut table;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            cursor = match cursor
                .entry(part.to_string())
                .or_insert_with(|| Value::Table(Table::new()))
            {
                Value::Table(t) => t,
                _ => return Err(Error::config(format!("`{part}` in `{key}` is not a section"))),
            };
        }
        cursor.insert(parts[parts.len() - 1].to_string(), parsed);
        Self::from_table(table)
    }

    /// Collision time `T_c = π R / k_kick` of the kicked packets.
    pub fn collision_time(&self) -> f64 {
        std::f64::consts::PI * self.grid.radius / self.packet.k_kick
    }

    /// Run length after scheme defaults.
    pub fn t_final(&self) -> f64 {
        self.evolution.t_final.unwrap_or_else(|| {
            if self.scheme.is_stevenson() {
                self.transport.period
            } else {
                3.0 * self.collision_time()
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.evolution;
        let positive = [
            ("grid.radius", self.grid.radius),
            ("evolution.dt", e.dt),
            ("evolution.delta", e.delta),
            ("packet.sigma", self.packet.sigma),
            ("packet.k_kick", self.packet.k_kick),
            ("transport.period", self.transport.period),
            ("t_final", self.t_final()),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.transport.trap_omega.is_finite() && self.transport.trap_omega >= 0.0) {
            return Err(Error::config("transport.trap_omega must be non-negative"));
        }
        if e.save_intervals == 0 {
            return Err(Error::config("evolution.save_intervals must be at least 1"));
        }
        if !e.interaction.is_finite() || !e.omega0.is_finite() {
            return Err(Error::config("interaction and omega0 must be finite"));
        }
        let b = &self.barrier;
        if !(b.target_reflection > 0.0 && b.target_reflection < 1.0) {
            return Err(Error::config("barrier.target_reflection must lie in (0, 1)"));
        }
        if let Some(t) = self.pulse.time {
            if !(t >= 0.0 && t <= self.t_final()) {
                return Err(Error::config(format!("pulse.time {t} outside the run")));
            }
        }
        // Five stored trajectories of every snapshot.
        let components = if self.scheme.is_spinor() { 2 } else { 1 };
        let bytes = 5 * (e.save_intervals + 1) * self.grid.n_points * components * 16;
        if bytes > MAX_TRAJECTORY_BYTES {
            return Err(Error::config(format!(
                "run would hold {bytes} bytes of snapshots (cap {MAX_TRAJECTORY_BYTES}); \
                 reduce save_intervals or n_points"
            )));
        }
        Ok(())
    }
}

/// Memory cap on stored snapshots across the five offset runs.
pub const MAX_TRAJECTORY_BYTES: usize = 4 << 30;

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

//! Agent checkpoints: a header followed by length-prefixed network checkpoints.
//!
//! Layout (little-endian): `"ACAG"`, version `u32`, algorithm `u8`
//! (0 cacla, 1 dpg, 2 spg), bounds `u8` (0 unit, 1 symmetric), step counter
//! `u64`, discount, actor lr, critic lr `f64`, target interval `u64`, SPG
//! samples `u32`, SPG SD floor, schedule initial SD, schedule half SD `f64`,
//! schedule t_max `u64`, label (`u32` length + UTF-8), network count `u32`,
//! then each network as `u64` byte length + ACNN blob. Networks are stored as
//! actor, critic, actor target, critic target and, for a shared trunk, trunk
//! and trunk target.

use std::path::Path;

use crate::agents::model::ActorCritic;
use crate::agents::noise::NoiseSchedule;
use crate::agents::{AgentBundle, AgentConfig, Algorithm};
use crate::env::ActionBounds;
use crate::error::{Error, Result};
use crate::nn::checkpoint::{put_u32, Reader};
use crate::nn::Network;

pub const AGENT_MAGIC: &[u8; 4] = b"ACAG";
pub const AGENT_VERSION: u32 = 1;

/// Decoded agent checkpoint.
#[derive(Debug, Clone)]
pub struct AgentCheckpoint {
    pub bundle: AgentBundle,
    pub label: String,
}

impl AgentBundle {
    pub fn to_checkpoint_bytes(&self, label: &str) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::new();
        out.extend_from_slice(AGENT_MAGIC);
        put_u32(&mut out, AGENT_VERSION);
        out.push(match self.algorithm {
            Algorithm::Cacla => 0,
            Algorithm::Dpg => 1,
            Algorithm::Spg => 2,
        });
        out.push(match self.online.bounds {
            ActionBounds::Unit => 0,
            ActionBounds::Symmetric => 1,
        });
        out.extend_from_slice(&self.step_counter().to_le_bytes());
        for v in [c.discount, c.actor_lr, c.critic_lr] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&c.target_update_interval.to_le_bytes());
        put_u32(&mut out, c.spg_samples as u32);
        for v in [
            c.spg_sd_floor,
            c.schedule.sd_initial(),
            c.schedule.sd_at_half(),
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&c.schedule.t_max().to_le_bytes());
        put_u32(&mut out, label.len() as u32);
        out.extend_from_slice(label.as_bytes());

        let mut nets: Vec<&Network> = vec![
            &self.online.actor,
            &self.online.critic,
            &self.target.actor,
            &self.target.critic,
        ];
        if let (Some(t), Some(tt)) = (&self.online.trunk, &self.target.trunk) {
            nets.push(&t.net);
            nets.push(&tt.net);
        }
        put_u32(&mut out, nets.len() as u32);
        for net in nets {
            let blob = net.to_bytes();
            out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
            out.extend_from_slice(&blob);
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<AgentCheckpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != AGENT_MAGIC {
            return Err(Error::Checkpoint("bad magic, expected ACAG".into()));
        }
        let version = r.u32()?;
        if version != AGENT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported agent version {version}"
            )));
        }
        let algorithm = match r.u8()? {
            0 => Algorithm::Cacla,
            1 => Algorithm::Dpg,
            2 => Algorithm::Spg,
            t => return Err(Error::Checkpoint(format!("unknown algorithm tag {t}"))),
        };
        let bounds = match r.u8()? {
            0 => ActionBounds::Unit,
            1 => ActionBounds::Symmetric,
            t => return Err(Error::Checkpoint(format!("unknown bounds tag {t}"))),
        };
        let step_counter = r.u64()?;
        let discount = r.f64()?;
        let actor_lr = r.f64()?;
        let critic_lr = r.f64()?;
        let target_update_interval = r.u64()?;
        let spg_samples = r.u32()? as usize;
        let spg_sd_floor = r.f64()?;
        let sd_initial = r.f64()?;
        let sd_at_half = r.f64()?;
        let t_max = r.u64()?;
        let label_len = r.u32()? as usize;
        let label = String::from_utf8(r.take(label_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("label is not UTF-8".into()))?;
        let count = r.u32()? as usize;
        if count != 4 && count != 6 {
            return Err(Error::Checkpoint(format!(
                "expected 4 or 6 networks, found {count}"
            )));
        }
        let mut nets = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u64()? as usize;
            nets.push(Network::from_bytes(r.take(len)?)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after networks".into()));
        }
        let mut nets = nets.into_iter();
        let (actor, critic, actor_t, critic_t) = (
            nets.next().expect("counted"),
            nets.next().expect("counted"),
            nets.next().expect("counted"),
            nets.next().expect("counted"),
        );
        let (trunk, trunk_t) = (nets.next(), nets.next());

        let kind = algorithm.critic_kind();
        let online = ActorCritic::from_parts(trunk, actor, critic, kind, bounds)?;
        let target = ActorCritic::from_parts(trunk_t, actor_t, critic_t, kind, bounds)?;
        let config = AgentConfig {
            actor_lr,
            critic_lr,
            discount,
            target_update_interval,
            spg_samples,
            spg_sd_floor,
            schedule: NoiseSchedule::new(sd_initial, sd_at_half, t_max)?,
        };
        let bundle =
            AgentBundle::from_parts(algorithm, config, online, Some(target), step_counter)?;
        Ok(AgentCheckpoint { bundle, label })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>, label: &str) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_bytes(label))?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AgentCheckpoint> {
        Self::from_checkpoint_bytes(&std::fs::read(path)?)
    }
}

//! Equal-power baseline: fixed power split per phase, frequency chosen so
//! the round ends exactly at the QoS deadline.

use crate::error::Result;
use crate::num::Scalar;
use crate::rates::{phase_times, Allocation};
use crate::sysmodel::{ChannelState, SystemConfig};

/// Equal split in every phase; `f` is left at `f_max`.
pub fn equal_powers<T: Scalar>(cfg: &SystemConfig<T>) -> Allocation<T> {
    let (l, k) = (cfg.fl_users, cfg.nfl_users);
    let s1 = T::one() / T::from_usize_lossy(l + k);
    let own = T::one() / T::from_usize_lossy(k);
    Allocation {
        eta_d: vec![s1; l],
        zeta_1: vec![s1; k],
        zeta_2: vec![own; k],
        eta_u: vec![T::one(); l],
        zeta_3: vec![own; k],
        f: cfg.f_max,
    }
}

/// The baseline allocation, or `None` if the deadline cannot be met without
/// exceeding `f_max` (no clamping).
pub fn bl_allocation<T: Scalar>(ch: &ChannelState<T>, cfg: &SystemConfig<T>) -> Result<Option<Allocation<T>>> {
    cfg.validate()?;
    let mut a = equal_powers(cfg);
    let times = phase_times(&a, ch, cfg)?;
    let left = cfg.t_qos - times.t_d - times.t_u;
    if !(left > T::zero()) {
        return Ok(None);
    }
    let f = cfg.compute_cycles() / left;
    if f > cfg.f_max || !(f > cfg.f_min) {
        return Ok(None);
    }
    a.f = f;
    Ok(Some(a))
}

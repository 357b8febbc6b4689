//! Scenario configuration, random user layout and MMSE channel-estimate variances.
//!
//! Powers are normalized by the total receiver noise power, so every SINR in
//! [`crate::rates`] is dimensionless. The half-band split of the third phase
//! keeps the same normalized powers.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ConfigIssue, Error, Result};
use crate::num::Scalar;

/// Reference path loss at 1 km, in dB.
pub const PATHLOSS_AT_1KM_DB: f64 = -148.1;
/// Path-loss slope, dB per decade of distance.
pub const PATHLOSS_SLOPE_DB: f64 = 37.6;

/// All scenario constants.
///
/// Normalized powers `rho_*` are derived from the raw watt figures and
/// `noise_dbm`; use [`SystemConfig::set_powers`] or [`SystemConfig::normalize`]
/// after changing any of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    /// `M`, base-station antennas.
    pub antennas: usize,
    /// `L`, federated-learning users.
    pub fl_users: usize,
    /// `K`, downlink-only users.
    pub nfl_users: usize,
    /// `B`, Hz.
    pub bandwidth_hz: T,
    /// `tau_c`, symbols per coherence block.
    pub coherence_len: usize,
    /// Pilot length for FL users in the broadcast phase.
    pub pilot_s1_fl: usize,
    /// Pilot length for non-FL users in the broadcast phase.
    pub pilot_s1_nfl: usize,
    /// Pilot length for non-FL users during local computation.
    pub pilot_s2: usize,
    /// Pilot length for FL uplink in the upload phase.
    pub pilot_s3_fl: usize,
    /// Pilot length for non-FL downlink in the upload phase.
    pub pilot_s3_nfl: usize,
    pub noise_dbm: T,
    pub p_d_watt: T,
    pub p_u_watt: T,
    pub p_p_watt: T,
    /// Normalized downlink power (`p_d_watt / noise_watt`).
    pub rho_d: T,
    pub rho_u: T,
    pub rho_p: T,
    /// Global update size, bits.
    pub global_update_bits: T,
    /// Local update size, bits.
    pub local_update_bits: T,
    /// `N_c`, local computing rounds.
    pub local_rounds: T,
    /// `D_bar`, largest local dataset (samples).
    pub max_samples: T,
    /// `c_bar`, largest cycles per sample.
    pub max_cycles_per_sample: T,
    /// Per-FL-user dataset sizes; each at most `max_samples`.
    pub samples: Vec<T>,
    /// Per-FL-user cycles per sample; each at most `max_cycles_per_sample`.
    pub cycles_per_sample: Vec<T>,
    pub f_min: T,
    pub f_max: T,
    /// Round-duration QoS threshold, seconds.
    pub t_qos: T,
    /// Side of the square service area, m.
    pub area_side: T,
    /// Minimum BS-user distance, m.
    pub min_distance: T,
    pub shadow_sigma_db: T,
}

/// Noise power in watts for a figure given in dBm.
pub fn dbm_to_watt<T: Scalar>(dbm: T) -> T {
    T::lit(10.0).powf((dbm - T::lit(30.0)) / T::lit(10.0))
}

impl<T: Scalar> SystemConfig<T> {
    /// The reference scenario: M=100, L=K=5, 250 m area, 3 s QoS.
    pub fn reference() -> Self {
        let l = 5;
        let mut cfg = Self {
            antennas: 100,
            fl_users: l,
            nfl_users: 5,
            bandwidth_hz: T::lit(20e6),
            coherence_len: 200,
            pilot_s1_fl: 20,
            pilot_s1_nfl: 20,
            pilot_s2: 20,
            pilot_s3_fl: 20,
            pilot_s3_nfl: 20,
            noise_dbm: T::lit(-92.0),
            p_d_watt: T::lit(10.0),
            p_u_watt: T::lit(0.2),
            p_p_watt: T::lit(0.2),
            rho_d: T::zero(),
            rho_u: T::zero(),
            rho_p: T::zero(),
            global_update_bits: T::lit(16e6),
            local_update_bits: T::lit(16e6),
            local_rounds: T::lit(20.0),
            max_samples: T::lit(1.6e5),
            max_cycles_per_sample: T::lit(20.0),
            samples: vec![T::lit(1.6e5); l],
            cycles_per_sample: vec![T::lit(20.0); l],
            f_min: T::zero(),
            f_max: T::lit(5e9),
            t_qos: T::lit(3.0),
            area_side: T::lit(250.0),
            min_distance: T::lit(35.0),
            shadow_sigma_db: T::lit(7.0),
        };
        cfg.normalize();
        cfg
    }

    pub fn noise_watt(&self) -> T {
        dbm_to_watt(self.noise_dbm)
    }

    /// Recomputes the normalized powers from the raw watt figures.
    pub fn normalize(&mut self) {
        let n = self.noise_watt();
        self.rho_d = self.p_d_watt / n;
        self.rho_u = self.p_u_watt / n;
        self.rho_p = self.p_p_watt / n;
    }

    /// Changes the FL user count and resizes the per-user compute vectors
    /// with the group maxima.
    pub fn set_fl_users(&mut self, l: usize) {
        self.fl_users = l;
        self.samples = vec![self.max_samples; l];
        self.cycles_per_sample = vec![self.max_cycles_per_sample; l];
    }

    /// `N_c * D_bar * c_bar`, the cycle count of one local computation.
    pub fn compute_cycles(&self) -> T {
        self.local_rounds * self.max_samples * self.max_cycles_per_sample
    }

    /// Local computation time at frequency control coefficient `f`.
    pub fn compute_time(&self, f: T) -> T {
        self.compute_cycles() / f
    }

    /// Per-user CPU frequency that equalizes computation time across FL users.
    pub fn user_frequency(&self, l: usize, f: T) -> T {
        self.samples[l] * self.cycles_per_sample[l] * f / (self.max_samples * self.max_cycles_per_sample)
    }

    /// Every invariant violation, each tagged with its config key.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let (m, l, k) = (self.antennas, self.fl_users, self.nfl_users);
        if l == 0 {
            out.push(ConfigIssue::new("L", "at least one FL user is required"));
        }
        if k == 0 {
            out.push(ConfigIssue::new("K", "at least one non-FL user is required"));
        }
        if m < l + k {
            out.push(ConfigIssue::new("M", format!("M={m} must be at least L+K={}", l + k)));
        }
        // M = L+K leaves zero array gain in the broadcast phase; every rate there is 0.
        if m == l + k && l + k > 0 {
            out.push(ConfigIssue::new("M", "M must exceed L+K for a positive zero-forcing gain"));
        }
        let pilots = [
            ("tau_dp", self.pilot_s1_fl, l + k),
            ("tau_1p", self.pilot_s1_nfl, l + k),
            ("tau_2p", self.pilot_s2, k),
            ("tau_up", self.pilot_s3_fl, l + k),
            ("tau_3p", self.pilot_s3_nfl, l + k),
        ];
        for (key, tau, need) in pilots {
            if tau < need.max(1) {
                out.push(ConfigIssue::new(key, format!("pilot length {tau} below required {}", need.max(1))));
            }
            if tau >= self.coherence_len {
                out.push(ConfigIssue::new(key, format!("pilot length {tau} must be below tau_c={}", self.coherence_len)));
            }
        }
        let positive = [
            ("B", self.bandwidth_hz),
            ("p_d_watt", self.p_d_watt),
            ("p_u_watt", self.p_u_watt),
            ("p_p_watt", self.p_p_watt),
            ("S_d", self.global_update_bits),
            ("S_u", self.local_update_bits),
            ("N_c", self.local_rounds),
            ("D_bar", self.max_samples),
            ("c_bar", self.max_cycles_per_sample),
            ("f_max", self.f_max),
            ("t_qos", self.t_qos),
            ("D_side", self.area_side),
            ("d_min", self.min_distance),
        ];
        for (key, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                out.push(ConfigIssue::new(key, format!("must be positive and finite, got {v}")));
            }
        }
        if !self.noise_dbm.is_finite() {
            out.push(ConfigIssue::new("noise_dbm", "must be finite"));
        }
        if !(self.shadow_sigma_db >= T::zero()) {
            out.push(ConfigIssue::new("shadow_sigma_db", "must be non-negative"));
        }
        if !(self.f_min >= T::zero()) || !(self.f_min < self.f_max) {
            out.push(ConfigIssue::new("f_min", format!("need 0 <= f_min < f_max, got {} / {}", self.f_min, self.f_max)));
        }
        if self.min_distance * T::lit(2.0) >= self.area_side {
            out.push(ConfigIssue::new("d_min", "minimum distance must be below half the area side"));
        }
        if self.samples.len() != l {
            out.push(ConfigIssue::new("samples", format!("expected {l} entries, got {}", self.samples.len())));
        } else if self.samples.iter().any(|&d| !(d > T::zero()) || d > self.max_samples) {
            out.push(ConfigIssue::new("samples", "entries must lie in (0, D_bar]"));
        }
        if self.cycles_per_sample.len() != l {
            out.push(ConfigIssue::new("cycles", format!("expected {l} entries, got {}", self.cycles_per_sample.len())));
        } else if self.cycles_per_sample.iter().any(|&c| !(c > T::zero()) || c > self.max_cycles_per_sample) {
            out.push(ConfigIssue::new("cycles", "entries must lie in (0, c_bar]"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    /// Parses the `key = value` format. Keys not present keep their
    /// [`SystemConfig::reference`] value. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::reference();
        let mut issues = Vec::new();
        let mut samples: Option<Vec<T>> = None;
        let mut cycles: Option<Vec<T>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(ConfigIssue::new(line, format!("line {}: expected key = value", lineno + 1)));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if let Err(msg) = cfg.set_key(key, value, &mut samples, &mut cycles) {
                issues.push(ConfigIssue::new(key, msg));
            }
        }
        let l = cfg.fl_users;
        cfg.samples = samples.unwrap_or_else(|| vec![cfg.max_samples; l]);
        cfg.cycles_per_sample = cycles.unwrap_or_else(|| vec![cfg.max_cycles_per_sample; l]);
        cfg.normalize();
        issues.extend(cfg.issues());
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(issues))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn set_key(
        &mut self,
        key: &str,
        value: &str,
        samples: &mut Option<Vec<T>>,
        cycles: &mut Option<Vec<T>>,
    ) -> std::result::Result<(), String> {
        fn int(v: &str) -> std::result::Result<usize, String> {
            v.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got {v:?}"))
        }
        fn real<T: Scalar>(v: &str) -> std::result::Result<T, String> {
            v.parse::<f64>().map(T::lit).map_err(|_| format!("expected a number, got {v:?}"))
        }
        fn list<T: Scalar>(v: &str) -> std::result::Result<Vec<T>, String> {
            v.split(',').map(|s| real(s.trim())).collect()
        }
        match key {
            "M" => self.antennas = int(value)?,
            "L" => self.fl_users = int(value)?,
            "K" => self.nfl_users = int(value)?,
            "B" => self.bandwidth_hz = real(value)?,
            "tau_c" => self.coherence_len = int(value)?,
            "tau_dp" => self.pilot_s1_fl = int(value)?,
            "tau_1p" => self.pilot_s1_nfl = int(value)?,
            "tau_2p" => self.pilot_s2 = int(value)?,
            "tau_up" => self.pilot_s3_fl = int(value)?,
            "tau_3p" => self.pilot_s3_nfl = int(value)?,
            "noise_dbm" => self.noise_dbm = real(value)?,
            "p_d_watt" => self.p_d_watt = real(value)?,
            "p_u_watt" => self.p_u_watt = real(value)?,
            "p_p_watt" => self.p_p_watt = real(value)?,
            "S_d" => self.global_update_bits = real(value)?,
            "S_u" => self.local_update_bits = real(value)?,
            "N_c" => self.local_rounds = real(value)?,
            "D_bar" => self.max_samples = real(value)?,
            "c_bar" => self.max_cycles_per_sample = real(value)?,
            "samples" => *samples = Some(list(value)?),
            "cycles" => *cycles = Some(list(value)?),
            "f_min" => self.f_min = real(value)?,
            "f_max" => self.f_max = real(value)?,
            "t_qos" => self.t_qos = real(value)?,
            "D_side" => self.area_side = real(value)?,
            "d_min" => self.min_distance = real(value)?,
            "shadow_sigma_db" => self.shadow_sigma_db = real(value)?,
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    /// Serializes back to the `key = value` format accepted by [`SystemConfig::parse`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let join = |v: &[T]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "M = {}", self.antennas);
        let _ = writeln!(s, "L = {}", self.fl_users);
        let _ = writeln!(s, "K = {}", self.nfl_users);
        let _ = writeln!(s, "B = {}", self.bandwidth_hz);
        let _ = writeln!(s, "tau_c = {}", self.coherence_len);
        let _ = writeln!(s, "tau_dp = {}", self.pilot_s1_fl);
        let _ = writeln!(s, "tau_1p = {}", self.pilot_s1_nfl);
        let _ = writeln!(s, "tau_2p = {}", self.pilot_s2);
        let _ = writeln!(s, "tau_up = {}", self.pilot_s3_fl);
        let _ = writeln!(s, "tau_3p = {}", self.pilot_s3_nfl);
        let _ = writeln!(s, "noise_dbm = {}", self.noise_dbm);
        let _ = writeln!(s, "p_d_watt = {}", self.p_d_watt);
        let _ = writeln!(s, "p_u_watt = {}", self.p_u_watt);
        let _ = writeln!(s, "p_p_watt = {}", self.p_p_watt);
        let _ = writeln!(s, "S_d = {}", self.global_update_bits);
        let _ = writeln!(s, "S_u = {}", self.local_update_bits);
        let _ = writeln!(s, "N_c = {}", self.local_rounds);
        let _ = writeln!(s, "D_bar = {}", self.max_samples);
        let _ = writeln!(s, "c_bar = {}", self.max_cycles_per_sample);
        let _ = writeln!(s, "samples = {}", join(&self.samples));
        let _ = writeln!(s, "cycles = {}", join(&self.cycles_per_sample));
        let _ = writeln!(s, "f_min = {}", self.f_min);
        let _ = writeln!(s, "f_max = {}", self.f_max);
        let _ = writeln!(s, "t_qos = {}", self.t_qos);
        let _ = writeln!(s, "D_side = {}", self.area_side);
        let _ = writeln!(s, "d_min = {}", self.min_distance);
        let _ = writeln!(s, "shadow_sigma_db = {}", self.shadow_sigma_db);
        s
    }
}

/// Large-scale fading and estimate variances for one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState<T> {
    /// FL users' large-scale fading, linear.
    pub beta_fl: Vec<T>,
    /// Non-FL users' large-scale fading, linear.
    pub beta_nfl: Vec<T>,
    /// FL estimate variance, broadcast phase.
    pub sigma2_d: Vec<T>,
    /// FL estimate variance, upload phase.
    pub sigma2_u: Vec<T>,
    pub sigma2_1: Vec<T>,
    pub sigma2_2: Vec<T>,
    pub sigma2_3: Vec<T>,
    /// User coordinates in metres relative to the BS; FL users first.
    pub positions: Vec<(T, T)>,
    pub seed: u64,
}

impl<T: Scalar> ChannelState<T> {
    /// Builds the estimate variances for given large-scale fading values.
    pub fn from_betas(cfg: &SystemConfig<T>, beta_fl: Vec<T>, beta_nfl: Vec<T>) -> Result<Self> {
        let var = |tau: usize, b: &[T]| -> Result<Vec<T>> {
            b.iter().map(|&beta| mmse_variance(cfg.rho_p, T::from_usize_lossy(tau), beta)).collect()
        };
        Ok(Self {
            sigma2_d: var(cfg.pilot_s1_fl, &beta_fl)?,
            sigma2_u: var(cfg.pilot_s3_fl, &beta_fl)?,
            sigma2_1: var(cfg.pilot_s1_nfl, &beta_nfl)?,
            sigma2_2: var(cfg.pilot_s2, &beta_nfl)?,
            sigma2_3: var(cfg.pilot_s3_nfl, &beta_nfl)?,
            beta_fl,
            beta_nfl,
            positions: Vec::new(),
            seed: 0,
        })
    }

    pub fn fl_users(&self) -> usize {
        self.beta_fl.len()
    }

    pub fn nfl_users(&self) -> usize {
        self.beta_nfl.len()
    }
}

/// Large-scale fading gain for distance `d` (m) and shadowing `z` (dB).
pub fn pathloss_beta<T: Scalar>(d: T, z: T, d_min: T) -> Result<T> {
    if !(d >= d_min) {
        return Err(Error::Domain(format!("distance {d} m below minimum {d_min} m")));
    }
    let db = T::lit(PATHLOSS_AT_1KM_DB) - T::lit(PATHLOSS_SLOPE_DB) * (d / T::lit(1000.0)).log10() + z;
    Ok(T::lit(10.0).powf(db / T::lit(10.0)))
}

/// Variance of the MMSE channel estimate from `tau` pilot symbols at
/// normalized power `rho_p`.
pub fn mmse_variance<T: Scalar>(rho_p: T, tau: T, beta: T) -> Result<T> {
    if !(rho_p > T::zero()) || !(tau >= T::one()) || !(beta >= T::zero()) {
        return Err(Error::Domain(format!(
            "mmse_variance needs rho_p > 0, tau >= 1, beta >= 0; got {rho_p}, {tau}, {beta}"
        )));
    }
    let snr = rho_p * tau * beta;
    Ok(snr * beta / (snr + T::one()))
}

/// Uniform user drop in the square around the BS with log-normal shadowing.
/// Deterministic in `(cfg, seed)`.
pub fn sample_layout<T: Scalar>(cfg: &SystemConfig<T>, seed: u64) -> Result<ChannelState<T>> {
    cfg.validate()?;
    // Separate streams keep the non-FL draws fixed when L changes.
    let mut nfl_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fl_rng = nfl_rng.clone();
    fl_rng.set_stream(1);
    let half = cfg.area_side.as_f64() / 2.0;
    let d_min = cfg.min_distance.as_f64();
    let shadow = Normal::new(0.0, cfg.shadow_sigma_db.as_f64())
        .map_err(|e| Error::Domain(format!("shadowing distribution: {e}")))?;
    let n = cfg.fl_users + cfg.nfl_users;
    let mut positions = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    for i in 0..n {
        let rng = if i < cfg.fl_users { &mut fl_rng } else { &mut nfl_rng };
        let (x, y) = loop {
            let x = rng.random_range(-half..half);
            let y = rng.random_range(-half..half);
            if (x * x + y * y).sqrt() >= d_min {
                break (x, y);
            }
        };
        let z = shadow.sample(rng);
        let d = T::lit((x * x + y * y).sqrt());
        positions.push((T::lit(x), T::lit(y)));
        betas.push(pathloss_beta(d, T::lit(z), cfg.min_distance)?);
    }
    let beta_nfl = betas.split_off(cfg.fl_users);
    let mut ch = ChannelState::from_betas(cfg, betas, beta_nfl)?;
    ch.positions = positions;
    ch.seed = seed;
    Ok(ch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn pathloss_reference_points() {
        let b = pathloss_beta(1000.0, 0.0, 35.0).unwrap();
        assert!(rel(b, 10f64.powf(-14.81)) < 1e-12);
        assert!(rel(b, 1.549e-15) < 1e-3);
        let shadowed = pathloss_beta(1000.0, 10.0, 35.0).unwrap();
        assert!(rel(shadowed, 10.0 * b) < 1e-12);
        let near = pathloss_beta(100.0, 0.0, 35.0).unwrap();
        assert!(rel(near, 10f64.powf(-11.05)) < 1e-12);
    }

    #[test]
    fn pathloss_rejects_short_distance() {
        assert!(matches!(pathloss_beta(20.0, 0.0, 35.0), Err(Error::Domain(_))));
    }

    #[test]
    fn mmse_examples() {
        assert_eq!(mmse_variance(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(mmse_variance(1.0, 1.0, 1.0).unwrap(), 0.5);
        for beta in [1e-12, 1e-3, 1.0, 7.5] {
            let rho = 1e3 / beta;
            let r = mmse_variance(rho, 1.0, beta).unwrap() / beta;
            assert!(r > 0.999 && r < 1.0, "{r}");
        }
        assert!(mmse_variance(-1.0, 1.0, 1.0).is_err());
        assert!(mmse_variance(1.0, 0.5, 1.0).is_err());
        assert!(mmse_variance(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn normalization_is_exact() {
        let cfg = SystemConfig::<f64>::reference();
        let noise = 10f64.powf((-92.0 - 30.0) / 10.0);
        assert_eq!(cfg.noise_watt(), noise);
        assert_eq!(cfg.rho_d, 10.0 / noise);
        assert_eq!(cfg.rho_u, 0.2 / noise);
        assert_eq!(cfg.rho_p, 0.2 / noise);
    }

    #[test]
    fn layout_is_deterministic_and_ordered() {
        let cfg = SystemConfig::<f64>::reference();
        let a = sample_layout(&cfg, 42).unwrap();
        let b = sample_layout(&cfg, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_layout(&cfg, 43).unwrap();
        assert_ne!(a.beta_fl, c.beta_fl);
        let pairs = a
            .sigma2_d
            .iter()
            .zip(&a.beta_fl)
            .chain(a.sigma2_u.iter().zip(&a.beta_fl))
            .chain(a.sigma2_1.iter().zip(&a.beta_nfl))
            .chain(a.sigma2_2.iter().zip(&a.beta_nfl))
            .chain(a.sigma2_3.iter().zip(&a.beta_nfl));
        for (s, b) in pairs {
            assert!(*s > 0.0 && s <= b);
        }
        for &(x, y) in &a.positions {
            let d = (x * x + y * y).sqrt();
            assert!(d >= 35.0 && x.abs() <= 125.0 && y.abs() <= 125.0);
        }
    }

    #[test]
    fn parse_round_trips_and_names_bad_keys() {
        let cfg = SystemConfig::<f64>::reference();
        let back = SystemConfig::<f64>::parse(&cfg.to_config_string()).unwrap();
        assert_eq!(cfg, back);

        let err = SystemConfig::<f64>::parse("M = 100\nbogus_key = 3\nt_qos = fast\n").unwrap_err();
        let Error::Config(issues) = err else { panic!("expected config error") };
        let keys: Vec<_> = issues.iter().map(|i| i.key.as_str()).collect();
        assert!(keys.contains(&"bogus_key"));
        assert!(keys.contains(&"t_qos"));
    }

    #[test]
    fn validation_reports_every_violation() {
        let text = "M = 8\nL = 5\nK = 5\ntau_2p = 250\nf_min = 6e9\n";
        let Error::Config(issues) = SystemConfig::<f64>::parse(text).unwrap_err() else { panic!() };
        let keys: Vec<_> = issues.iter().map(|i| i.key.as_str()).collect();
        assert!(keys.contains(&"M"));
        assert!(keys.contains(&"tau_2p"));
        assert!(keys.contains(&"f_min"));
        assert!(SystemConfig::<f64>::parse("L = 0").is_err());
        assert!(SystemConfig::<f64>::parse("K = 0").is_err());
    }

    #[test]
    fn reference_compute_time() {
        let cfg = SystemConfig::<f64>::reference();
        assert!(rel(cfg.compute_time(5e9), 0.0128) < 1e-12);
        assert!(rel(cfg.compute_time(10e9), 0.0064) < 1e-12);
        assert_eq!(cfg.user_frequency(0, 2e9), 2e9);
    }

    #[test]
    fn works_in_single_precision() {
        let cfg = SystemConfig::<f32>::reference();
        let ch = sample_layout(&cfg, 7).unwrap();
        assert!(ch.beta_fl.iter().all(|b| *b > 0.0 && b.is_finite()));
    }
}

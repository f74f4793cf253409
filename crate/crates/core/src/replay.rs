//! Offline replay of logged trajectories.
//!
//! A trajectory is a headered CSV with one row per tick. Required columns
//! are `timestamp`, `x`, `y`, `yaw` (object pose in the sensor frame, m and
//! rad). Optional column groups, each all-or-nothing:
//!
//! * `z`, `roll`, `pitch`: ignored by the planar contact model
//! * `radius`, `length`, `mass`: per-row object dimensions
//! * `taxel_<r>_<c>`: reference binary tactile map
//! * robot and object state columns (see [`robot_columns`])
//! * `c_fr`, `c_fl`, `c_rr`, `c_rl`: foot contacts (0/1)
//! * `cmd_vx`, `cmd_vy`, `cmd_wz`: velocity command
//! * `action_0` .. `action_11`: policy action

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::curriculum::{push_schedule, sample_episode, EpisodeSetup};
use crate::error::ReplayError;
use crate::gait::{alpha_task, gait_reward, FootContactState, GaitTracker, DIAG_PAIRS};
use crate::geometry::{active_taxels, force_from_active, ContactModel, CylinderPose};
use crate::grid::{iou, BinaryMap};
use crate::observation::{build_observation, ObsWindow, RawObservation, FLAT_DIM};
use crate::reward::{
    check_termination, eval_rewards, Joints, ObjectState, RewardBreakdown, RewardInputs, RewardTerm, RobotState,
    TerminationReason, VelocityCommand, Vec3, GO1_JOINT_MAX, GO1_JOINT_MIN,
};
use crate::signal::{binarize, taxel_column, SignalPipeline, TactileFrame};

const FEET: [&str; 4] = ["fr", "fl", "rr", "rl"];
const AXES: [&str; 3] = ["x", "y", "z"];

fn vec_cols(prefix: &str) -> Vec<String> {
    AXES.iter().map(|a| format!("{prefix}_{a}")).collect()
}

fn indexed_cols(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Robot and object state columns, in file order.
pub fn robot_columns() -> Vec<String> {
    let mut c = Vec::new();
    for p in ["p_w", "v_r", "theta_w", "w_r"] {
        c.extend(vec_cols(p));
    }
    for p in ["q", "qd", "qdd", "tau"] {
        c.extend(indexed_cols(p, 12));
    }
    for kind in ["pos", "vel", "force"] {
        for f in FEET {
            c.extend(vec_cols(&format!("foot_{f}_{kind}")));
        }
    }
    c.extend(indexed_cols("tc_force", 8));
    c.push("body_force".into());
    for p in ["obj_p_r", "obj_v_r", "obj_theta_r", "obj_w_r"] {
        c.extend(vec_cols(p));
    }
    c.push("obj_p_w_x".into());
    c.push("obj_p_w_y".into());
    c
}

pub fn contact_columns() -> Vec<String> {
    FEET.iter().map(|f| format!("c_{f}")).collect()
}

pub fn command_columns() -> Vec<String> {
    vec!["cmd_vx".into(), "cmd_vy".into(), "cmd_wz".into()]
}

pub fn action_columns() -> Vec<String> {
    indexed_cols("action", 12)
}

pub fn reference_columns(rows: usize, cols: usize) -> Vec<String> {
    (0..rows).flat_map(|r| (0..cols).map(move |c| taxel_column(r, c))).collect()
}

/// One row of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub dims: Option<[f64; 3]>,
    pub reference: Option<BinaryMap>,
    pub robot: Option<RobotState>,
    pub object: Option<ObjectState>,
    pub contacts: Option<FootContactState>,
    pub command: Option<VelocityCommand>,
    pub action: Option<Joints>,
}

impl TrajectoryRow {
    pub fn pose(&self, cfg: &SimConfig) -> CylinderPose {
        let [radius, length, mass] = self.dims.unwrap_or([
            cfg.replay_object.radius,
            cfg.replay_object.length,
            cfg.replay_object.mass,
        ]);
        CylinderPose::new(self.x, self.y, self.yaw, radius, length, mass)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn has_reference(&self) -> bool {
        self.rows.first().is_some_and(|r| r.reference.is_some())
    }

    pub fn has_robot_state(&self) -> bool {
        self.rows.first().is_some_and(|r| r.robot.is_some())
    }

    pub fn has_contacts(&self) -> bool {
        self.rows.first().is_some_and(|r| r.contacts.is_some())
    }

    pub fn contacts(&self) -> Option<Vec<FootContactState>> {
        self.rows.iter().map(|r| r.contacts).collect()
    }

    /// Median tick length, s.
    pub fn dt(&self) -> Option<f64> {
        let mut d: Vec<f64> = self.rows.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }
}

struct Header {
    index: HashMap<String, usize>,
    len: usize,
}

impl Header {
    fn group(&self, names: &[String]) -> Result<Option<Vec<usize>>, ReplayError> {
        let found: Vec<Option<usize>> = names.iter().map(|n| self.index.get(n).copied()).collect();
        let present = found.iter().filter(|f| f.is_some()).count();
        if present == 0 {
            return Ok(None);
        }
        if present < names.len() {
            let missing: Vec<&str> = names
                .iter()
                .zip(&found)
                .filter(|(_, f)| f.is_none())
                .map(|(n, _)| n.as_str())
                .take(5)
                .collect();
            return Err(ReplayError::Schema(format!(
                "incomplete column group starting at '{}': missing {}",
                names[0],
                missing.join(", ")
            )));
        }
        Ok(Some(found.into_iter().map(|f| f.unwrap()).collect()))
    }
}

fn take<const N: usize>(vals: &[f64], at: &mut usize) -> [f64; N] {
    let out: [f64; N] = std::array::from_fn(|i| vals[*at + i]);
    *at += N;
    out
}

fn robot_from_values(v: &[f64], q_default: &Joints) -> (RobotState, ObjectState) {
    let mut at = 0;
    let p_w = take::<3>(v, &mut at);
    let v_r = take::<3>(v, &mut at);
    let theta_w = take::<3>(v, &mut at);
    let w_r = take::<3>(v, &mut at);
    let q = take::<12>(v, &mut at);
    let q_dot = take::<12>(v, &mut at);
    let q_ddot = take::<12>(v, &mut at);
    let tau = take::<12>(v, &mut at);
    let foot_pos_w: [Vec3; 4] = std::array::from_fn(|_| take::<3>(v, &mut at));
    let foot_vel_w: [Vec3; 4] = std::array::from_fn(|_| take::<3>(v, &mut at));
    let foot_force_w: [Vec3; 4] = std::array::from_fn(|_| take::<3>(v, &mut at));
    let thigh_calf_force = take::<8>(v, &mut at);
    let body_ground_force = v[at];
    at += 1;
    let object = ObjectState {
        p_r: take::<3>(v, &mut at),
        v_r: take::<3>(v, &mut at),
        theta_r: take::<3>(v, &mut at),
        w_r: take::<3>(v, &mut at),
        p_w_xy: take::<2>(v, &mut at),
    };
    let robot = RobotState {
        p_w,
        v_r,
        theta_w,
        w_r,
        q,
        q_dot,
        q_ddot,
        tau,
        foot_pos_w,
        foot_vel_w,
        foot_force_w,
        thigh_calf_force,
        body_ground_force,
        q_default: *q_default,
        q_min: GO1_JOINT_MIN,
        q_max: GO1_JOINT_MAX,
    };
    (robot, object)
}

fn robot_values(r: &RobotState, o: &ObjectState) -> Vec<f64> {
    let mut v = Vec::with_capacity(130);
    for a in [&r.p_w, &r.v_r, &r.theta_w, &r.w_r] {
        v.extend_from_slice(a);
    }
    for a in [&r.q, &r.q_dot, &r.q_ddot, &r.tau] {
        v.extend_from_slice(a);
    }
    for group in [&r.foot_pos_w, &r.foot_vel_w, &r.foot_force_w] {
        for f in group {
            v.extend_from_slice(f);
        }
    }
    v.extend_from_slice(&r.thigh_calf_force);
    v.push(r.body_ground_force);
    for a in [&o.p_r, &o.v_r, &o.theta_r, &o.w_r] {
        v.extend_from_slice(a);
    }
    v.extend_from_slice(&o.p_w_xy);
    v
}

/// Parses a trajectory CSV. Grid shape decides the reference column names.
pub fn read_trajectory<R: Read>(input: R, cfg: &SimConfig) -> Result<Trajectory, ReplayError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr.headers().cloned().map_err(|e| ReplayError::Parse {
        line: 1,
        message: format!("unreadable header: {e}"),
    })?;
    let mut index = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if index.insert(name.trim().to_string(), i).is_some() {
            return Err(ReplayError::Schema(format!("duplicate column '{name}'")));
        }
    }
    let header = Header {
        index,
        len: headers.len(),
    };
    let base = header
        .group(&["timestamp".into(), "x".into(), "y".into(), "yaw".into()])?
        .ok_or_else(|| ReplayError::Schema("missing required columns timestamp, x, y, yaw".into()))?;
    if base.len() < 4 {
        return Err(ReplayError::Schema("missing required columns timestamp, x, y, yaw".into()));
    }
    header.group(&["z".into(), "roll".into(), "pitch".into()])?;
    let dims = header.group(&["radius".into(), "length".into(), "mass".into()])?;
    let reference = header.group(&reference_columns(cfg.grid.rows, cfg.grid.cols))?;
    let robot = header.group(&robot_columns())?;
    let contacts = header.group(&contact_columns())?;
    let command = header.group(&command_columns())?;
    let action = header.group(&action_columns())?;

    let mut rows = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            ReplayError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len {
            return Err(ReplayError::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len, rec.len()),
            });
        }
        let num = |i: usize| -> Result<f64, ReplayError> {
            let s = rec[i].trim();
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ReplayError::Parse {
                line,
                message: format!("column '{}': '{s}' is not a finite number", &headers[i]),
            })
        };
        let nums = |idx: &[usize]| -> Result<Vec<f64>, ReplayError> { idx.iter().map(|&i| num(i)).collect() };
        let bit = |i: usize| -> Result<u8, ReplayError> {
            match rec[i].trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                s => Err(ReplayError::Parse {
                    line,
                    message: format!("column '{}': '{s}' is not 0 or 1", &headers[i]),
                }),
            }
        };

        let timestamp = num(base[0])?;
        if timestamp <= last_t {
            return Err(ReplayError::Parse {
                line,
                message: "timestamps must be strictly increasing".into(),
            });
        }
        last_t = timestamp;

        let row_dims = match &dims {
            Some(idx) => {
                let v = nums(idx)?;
                Some([v[0], v[1], v[2]])
            }
            None => None,
        };
        let row_ref = match &reference {
            Some(idx) => {
                let data = idx.iter().map(|&i| bit(i)).collect::<Result<Vec<u8>, _>>()?;
                Some(BinaryMap::from_vec(cfg.grid.rows, cfg.grid.cols, data))
            }
            None => None,
        };
        let (row_robot, row_object) = match &robot {
            Some(idx) => {
                let (r, o) = robot_from_values(&nums(idx)?, &cfg.action.q_default);
                (Some(r), Some(o))
            }
            None => (None, None),
        };
        let row_contacts = match &contacts {
            Some(idx) => {
                let b: Vec<u8> = idx.iter().map(|&i| bit(i)).collect::<Result<_, _>>()?;
                Some(FootContactState::new(b[0] == 1, b[1] == 1, b[2] == 1, b[3] == 1))
            }
            None => None,
        };
        let row_cmd = match &command {
            Some(idx) => {
                let v = nums(idx)?;
                Some(VelocityCommand::new(v[0], v[1], v[2]))
            }
            None => None,
        };
        let row_action = match &action {
            Some(idx) => {
                let v = nums(idx)?;
                Some(std::array::from_fn(|j| v[j]))
            }
            None => None,
        };
        rows.push(TrajectoryRow {
            timestamp,
            x: num(base[1])?,
            y: num(base[2])?,
            yaw: num(base[3])?,
            dims: row_dims,
            reference: row_ref,
            robot: row_robot,
            object: row_object,
            contacts: row_contacts,
            command: row_cmd,
            action: row_action,
        });
    }
    Ok(Trajectory { rows })
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes a trajectory with every column group present in its first row.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory, rows: usize, cols: usize) -> Result<(), ReplayError> {
    let Some(first) = traj.rows.first() else {
        let mut w = csv_writer(out);
        w.write_record(["timestamp", "x", "y", "yaw"])?;
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = ["timestamp", "x", "y", "yaw"].iter().map(|s| s.to_string()).collect();
    if first.dims.is_some() {
        header.extend(["radius", "length", "mass"].map(String::from));
    }
    if first.reference.is_some() {
        header.extend(reference_columns(rows, cols));
    }
    if first.robot.is_some() {
        header.extend(robot_columns());
    }
    if first.contacts.is_some() {
        header.extend(contact_columns());
    }
    if first.command.is_some() {
        header.extend(command_columns());
    }
    if first.action.is_some() {
        header.extend(action_columns());
    }
    let mut w = csv_writer(out);
    w.write_record(&header)?;
    for r in &traj.rows {
        let mut rec = vec![fmt(r.timestamp), fmt(r.x), fmt(r.y), fmt(r.yaw)];
        if first.dims.is_some() {
            let d = r.dims.ok_or_else(|| ReplayError::Schema("inconsistent dims".into()))?;
            rec.extend(d.iter().map(|v| fmt(*v)));
        }
        if first.reference.is_some() {
            let m = r.reference.as_ref().ok_or_else(|| ReplayError::Schema("inconsistent reference".into()))?;
            rec.extend(m.as_slice().iter().map(|v| v.to_string()));
        }
        if first.robot.is_some() {
            let (rb, ob) = r
                .robot
                .as_ref()
                .zip(r.object.as_ref())
                .ok_or_else(|| ReplayError::Schema("inconsistent robot state".into()))?;
            rec.extend(robot_values(rb, ob).into_iter().map(fmt));
        }
        if first.contacts.is_some() {
            let c = r.contacts.ok_or_else(|| ReplayError::Schema("inconsistent contacts".into()))?;
            rec.extend(c.contact.iter().map(|&b| if b { "1".to_string() } else { "0".to_string() }));
        }
        if first.command.is_some() {
            let c = r.command.ok_or_else(|| ReplayError::Schema("inconsistent command".into()))?;
            rec.extend(c.as_array().map(fmt));
        }
        if first.action.is_some() {
            let a = r.action.ok_or_else(|| ReplayError::Schema("inconsistent action".into()))?;
            rec.extend(a.iter().map(|v| fmt(*v)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tactile replay

/// Per-model agreement with a reference stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFidelity {
    pub model: String,
    pub mean_iou: f64,
    pub iou: Vec<f64>,
    pub active_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub models: Vec<ModelFidelity>,
}

#[derive(Debug, Clone)]
pub struct TactileReplay {
    pub frames: Vec<TactileFrame>,
    pub fidelity: Option<ModelFidelity>,
}

/// Simulated tactile frames for every trajectory row.
///
/// With `noise_seed` the frames go through flip noise and latency; without
/// it they are the clean thresholded maps.
pub fn replay_tactile(traj: &Trajectory, cfg: &SimConfig, model: &ContactModel, noise_seed: Option<u64>) -> TactileReplay {
    let grid = &cfg.grid;
    let mut noisy = noise_seed.map(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pipe = SignalPipeline::new(&cfg.pipeline, grid.rows, grid.cols, &mut rng);
        (rng, pipe)
    });
    let frames: Vec<TactileFrame> = traj
        .rows
        .iter()
        .map(|row| {
            let pose = row.pose(cfg);
            let force = force_from_active(&active_taxels(grid, &pose, model), pose.mass);
            match noisy.as_mut() {
                Some((rng, pipe)) => pipe.step(&force, row.timestamp, rng),
                None => binarize(&force, &cfg.pipeline, row.timestamp),
            }
        })
        .collect();
    let fidelity = traj.has_reference().then(|| {
        let iou_series: Vec<f64> = frames
            .iter()
            .zip(&traj.rows)
            .map(|(f, r)| iou(&f.map, r.reference.as_ref().expect("reference present")))
            .collect();
        ModelFidelity {
            model: model.name().to_string(),
            mean_iou: mean(&iou_series),
            iou: iou_series,
            active_counts: frames.iter().map(|f| f.map.count_active()).collect(),
        }
    });
    TactileReplay { frames, fidelity }
}

/// Clean replay under all three contact models against the reference maps.
pub fn fidelity_report(traj: &Trajectory, cfg: &SimConfig) -> Result<FidelityReport, ReplayError> {
    if !traj.has_reference() {
        return Err(ReplayError::Schema("fidelity needs reference taxel columns".into()));
    }
    let filtered = match cfg.contact_model {
        m @ ContactModel::Filtered { .. } => m,
        _ => ContactModel::filtered_default(),
    };
    let models = [ContactModel::Intersect, filtered, ContactModel::Expanded];
    let out = crate::batch::par_map(&models, |m| {
        replay_tactile(traj, cfg, m, None).fidelity.expect("reference present")
    });
    Ok(FidelityReport { models: out })
}

/// Writes a fidelity report as long-form CSV: model, frame, iou, active.
pub fn write_fidelity<W: Write>(out: W, report: &FidelityReport) -> Result<(), ReplayError> {
    let mut w = csv_writer(out);
    w.write_record(["model", "frame", "iou", "active"])?;
    for m in &report.models {
        for (k, (i, a)) in m.iou.iter().zip(&m.active_counts).enumerate() {
            w.write_record([m.model.clone(), k.to_string(), fmt(*i), a.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_fidelity<R: Read>(input: R) -> Result<FidelityReport, ReplayError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut models: Vec<ModelFidelity> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let perr = |m: &str| ReplayError::Parse {
            line,
            message: m.to_string(),
        };
        if rec.len() != 4 {
            return Err(perr("expected model,frame,iou,active"));
        }
        let name = rec[0].to_string();
        let iou_v: f64 = rec[2].parse().map_err(|_| perr("bad iou"))?;
        let active: usize = rec[3].parse().map_err(|_| perr("bad active count"))?;
        match models.last_mut() {
            Some(m) if m.model == name => {
                m.iou.push(iou_v);
                m.active_counts.push(active);
            }
            _ => models.push(ModelFidelity {
                model: name,
                mean_iou: 0.0,
                iou: vec![iou_v],
                active_counts: vec![active],
            }),
        }
    }
    for m in &mut models {
        m.mean_iou = mean(&m.iou);
    }
    Ok(FidelityReport { models })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Reward replay

#[derive(Debug, Clone, PartialEq)]
pub struct RewardRow {
    pub timestamp: f64,
    pub breakdown: RewardBreakdown,
    pub termination: Option<TerminationReason>,
}

/// Replays the reward stream of a logged run. Stops after the first
/// terminating tick.
pub fn replay_rewards(traj: &Trajectory, cfg: &SimConfig) -> Result<Vec<RewardRow>, ReplayError> {
    if !traj.has_robot_state() {
        return Err(ReplayError::Schema("reward replay needs the robot/object state columns".into()));
    }
    if !traj.has_contacts() {
        return Err(ReplayError::Schema("reward replay needs foot contact columns c_fr, c_fl, c_rr, c_rl".into()));
    }
    let default_dt = traj.dt().unwrap_or(1.0 / cfg.pipeline.sample_rate);
    let mut tracker = GaitTracker::new();
    let mut last_action = [0.0; 12];
    let mut last_cmd: Option<VelocityCommand> = None;
    let mut out = Vec::with_capacity(traj.rows.len());
    for (k, row) in traj.rows.iter().enumerate() {
        let robot = row.robot.as_ref().expect("checked");
        let object = row.object.as_ref().expect("checked");
        let contacts = row.contacts.expect("checked");
        let cmd = row.command.unwrap_or_default();
        let action = row.action.unwrap_or([0.0; 12]);
        let dt = if k == 0 {
            default_dt
        } else {
            row.timestamp - traj.rows[k - 1].timestamp
        };
        let changed = last_cmd.is_some_and(|c| c != cmd);
        last_cmd = Some(cmd);

        let row_out = step_reward(cfg, &mut tracker, robot, object, &contacts, &cmd, &action, &last_action, dt, changed);
        last_action = action;
        let stop = row_out.termination.is_some();
        out.push(RewardRow {
            timestamp: row.timestamp,
            ..row_out
        });
        if stop {
            break;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn step_reward(
    cfg: &SimConfig,
    tracker: &mut GaitTracker,
    robot: &RobotState,
    object: &ObjectState,
    contacts: &FootContactState,
    cmd: &VelocityCommand,
    action: &Joints,
    last_action: &Joints,
    dt: f64,
    command_changed: bool,
) -> RewardRow {
    tracker.update(contacts, dt, command_changed);
    let task = alpha_task(
        [robot.v_r[0], robot.v_r[1]],
        [cmd.vx, cmd.vy],
        [object.p_r[0], object.p_r[1]],
        &cfg.alpha_task,
    );
    let gait = gait_reward(contacts, tracker, task, &cfg.sym);
    let termination = check_termination(robot, object, &cfg.reward);
    let inputs = RewardInputs {
        robot,
        object,
        contacts,
        gait,
        command: cmd,
        action,
        last_action,
        terminated: termination.is_some(),
    };
    RewardRow {
        timestamp: 0.0,
        breakdown: eval_rewards(&inputs, &cfg.reward, &cfg.action),
        termination,
    }
}

pub fn rewards_header() -> Vec<&'static str> {
    let mut h = vec!["timestamp"];
    h.extend(RewardBreakdown::csv_header());
    h.push("terminated");
    h.push("reason");
    h
}

pub fn write_rewards<W: Write>(out: W, rows: &[RewardRow]) -> Result<(), ReplayError> {
    let mut w = csv_writer(out);
    w.write_record(rewards_header())?;
    for r in rows {
        let mut rec = vec![fmt(r.timestamp)];
        rec.extend(r.breakdown.terms.iter().map(|v| fmt(*v)));
        rec.push(fmt(r.breakdown.total));
        rec.push(if r.termination.is_some() { "1" } else { "0" }.to_string());
        rec.push(r.termination.map(|t| t.as_str()).unwrap_or("").to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rewards<R: Read>(input: R) -> Result<Vec<RewardRow>, ReplayError> {
    let mut rdr = csv::Reader::from_reader(input);
    let expected = rewards_header();
    let headers = rdr.headers()?.clone();
    if headers.len() != expected.len() || headers.iter().zip(&expected).any(|(a, b)| a != *b) {
        return Err(ReplayError::Schema("unexpected reward CSV header".into()));
    }
    let n = RewardTerm::ALL.len();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64, ReplayError> {
            rec[i].parse().map_err(|_| ReplayError::Parse {
                line,
                message: format!("column {i}: '{}' is not a number", &rec[i]),
            })
        };
        let mut terms = [0.0; crate::reward::TERM_COUNT];
        for (i, t) in terms.iter_mut().enumerate() {
            *t = num(1 + i)?;
        }
        let termination = match &rec[n + 3] {
            "" => None,
            "object_fallen" => Some(TerminationReason::ObjectFallen),
            "body_ground_contact" => Some(TerminationReason::BodyGroundContact),
            other => {
                return Err(ReplayError::Parse {
                    line,
                    message: format!("unknown termination reason '{other}'"),
                })
            }
        };
        rows.push(RewardRow {
            timestamp: num(0)?,
            breakdown: RewardBreakdown {
                terms,
                total: num(1 + n)?,
            },
            termination,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Gait metrics

/// Air-time statistics of the two diagonal pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitReport {
    /// Completed swing durations per diagonal pair, s.
    pub air_times: [Vec<f64>; 2],
    pub means: [f64; 2],
    pub std_devs: [f64; 2],
    /// |mean₁ − mean₂| / max(mean₁, mean₂).
    pub symmetry_ratio: f64,
    /// Completed pair swings per second.
    pub stepping_frequency: f64,
    pub duration: f64,
    pub insufficient_data: bool,
}

impl GaitReport {
    pub const MIN_SWINGS: usize = 2;

    pub fn from_air_times(air_times: [Vec<f64>; 2], duration: f64) -> Self {
        let stats = |v: &[f64]| {
            if v.is_empty() {
                return (0.0, 0.0);
            }
            let m = mean(v);
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
            (m, var.sqrt())
        };
        let (m0, s0) = stats(&air_times[0]);
        let (m1, s1) = stats(&air_times[1]);
        let hi = m0.max(m1);
        let symmetry_ratio = if hi > 0.0 { (m0 - m1).abs() / hi } else { 0.0 };
        let swings = air_times[0].len() + air_times[1].len();
        GaitReport {
            insufficient_data: air_times.iter().any(|v| v.len() < Self::MIN_SWINGS),
            means: [m0, m1],
            std_devs: [s0, s1],
            symmetry_ratio,
            stepping_frequency: if duration > 0.0 { swings as f64 / duration } else { 0.0 },
            duration,
            air_times,
        }
    }
}

/// Segments diagonal-pair swings (both feet off the ground) and reports
/// their air times. Swings cut off by the start or end of the log are
/// not counted.
pub fn gait_metrics(contacts: &[FootContactState], dt: f64) -> GaitReport {
    assert!(dt > 0.0, "dt must be positive");
    let mut air_times: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (k, &(a, b)) in DIAG_PAIRS.iter().enumerate() {
        let mut run: Option<(usize, bool)> = None; // (length, started after a stance tick)
        for (t, c) in contacts.iter().enumerate() {
            let swing = !c.get(a) && !c.get(b);
            match (swing, run.as_mut()) {
                (true, Some((len, _))) => *len += 1,
                (true, None) => run = Some((1, t > 0)),
                (false, Some(&mut (len, clean_start))) => {
                    if clean_start {
                        air_times[k].push(len as f64 * dt);
                    }
                    run = None;
                }
                (false, None) => {}
            }
        }
    }
    GaitReport::from_air_times(air_times, contacts.len() as f64 * dt)
}

pub fn write_gait<W: Write>(out: W, report: &GaitReport) -> Result<(), ReplayError> {
    let mut w = csv_writer(out);
    w.write_record(["pair", "swing", "air_time"])?;
    for (k, series) in report.air_times.iter().enumerate() {
        for (i, t) in series.iter().enumerate() {
            w.write_record([k.to_string(), i.to_string(), fmt(*t)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_gait<R: Read>(input: R, duration: f64) -> Result<GaitReport, ReplayError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut air: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let perr = |m: &str| ReplayError::Parse {
            line,
            message: m.to_string(),
        };
        let pair: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad pair"))?;
        let t: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad air_time"))?;
        if pair > 1 {
            return Err(perr("pair must be 0 or 1"));
        }
        air[pair].push(t);
    }
    Ok(GaitReport::from_air_times(air, duration))
}

/// Key/value summary of a gait report.
pub fn write_gait_summary<W: Write>(out: W, report: &GaitReport) -> Result<(), ReplayError> {
    let mut w = csv_writer(out);
    w.write_record(["metric", "value"])?;
    let rows = [
        ("mean_pair0", fmt(report.means[0])),
        ("mean_pair1", fmt(report.means[1])),
        ("std_pair0", fmt(report.std_devs[0])),
        ("std_pair1", fmt(report.std_devs[1])),
        ("symmetry_ratio", fmt(report.symmetry_ratio)),
        ("stepping_frequency_hz", fmt(report.stepping_frequency)),
        ("duration_s", fmt(report.duration)),
        ("insufficient_data", (report.insufficient_data as u8).to_string()),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Scripted episode

/// Synthetic gait used to script episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitPattern {
    Stand,
    Trot,
    Pace,
    Bound,
    /// Trot whose first diagonal pair swings twice as long as the second.
    AsymmetricTrot,
}

/// Contact sequence for `ticks` ticks of `dt`, 50% duty factor.
///
/// Trot, pace and bound alternate two leg pairs with `swing` seconds of
/// flight each. The asymmetric trot uses `4/3·swing` and `2/3·swing`.
pub fn gait_sequence(pattern: GaitPattern, swing: f64, dt: f64, ticks: usize) -> Vec<FootContactState> {
    use crate::gait::Foot::*;
    let groups = match pattern {
        GaitPattern::Stand => return vec![FootContactState::all_contact(); ticks],
        GaitPattern::Trot | GaitPattern::AsymmetricTrot => [[FR, RL], [FL, RR]],
        GaitPattern::Pace => [[FR, RR], [FL, RL]],
        GaitPattern::Bound => [[FR, FL], [RR, RL]],
    };
    let (first, second) = match pattern {
        GaitPattern::AsymmetricTrot => (swing * 4.0 / 3.0, swing * 2.0 / 3.0),
        _ => (swing, swing),
    };
    let n0 = (first / dt).round().max(1.0) as usize;
    let n1 = (second / dt).round().max(1.0) as usize;
    (0..ticks)
        .map(|t| {
            let phase = t % (n0 + n1);
            let airborne = if phase < n0 { groups[0] } else { groups[1] };
            let mut c = FootContactState::all_contact();
            for f in airborne {
                c.contact[f as usize] = false;
            }
            c
        })
        .collect()
}

/// Output of one scripted episode.
#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub setup: EpisodeSetup,
    pub trajectory: Trajectory,
    pub frames: Vec<TactileFrame>,
    pub rewards: Vec<RewardRow>,
    pub gait: GaitReport,
    /// Last flattened observation window.
    pub final_window: Vec<f64>,
}

/// Builds a scripted trajectory: randomized episode setup, trotting robot
/// tracking its command, object drifting on the back with pushes.
pub fn scripted_trajectory(cfg: &SimConfig, ticks: usize, rng: &mut ChaCha8Rng) -> (EpisodeSetup, Trajectory) {
    let fully = cfg.curriculum.fully_expanded();
    let setup = sample_episode(&cfg.randomization, &cfg.zero_command, fully, rng);
    let command = if setup.standing {
        VelocityCommand::default()
    } else {
        cfg.curriculum.sample_command(rng)
    };
    let dt = 1.0 / cfg.pipeline.sample_rate;
    let warmup = setup.zero_command_steps as usize;
    let pattern = if setup.standing { GaitPattern::Stand } else { GaitPattern::Trot };
    let mut contacts = gait_sequence(pattern, 0.3, dt, ticks);
    for c in contacts.iter_mut().take(warmup) {
        *c = FootContactState::all_contact();
    }
    let pushes = push_schedule(cfg.randomization.push_window_s, ticks, dt, rng);

    let r = setup.object.radius.clamp(CylinderPose::MIN_RADIUS, CylinderPose::MAX_RADIUS);
    let mut obj_offset = [setup.init_x, setup.init_y];
    let mut obj_vel = [0.0f64; 2];
    let mut torso = [0.0f64; 2];
    let mut rows = Vec::with_capacity(ticks);
    for (t, contact) in contacts.iter().enumerate() {
        let timestamp = t as f64 * dt;
        let cmd = if t < warmup { VelocityCommand::default() } else { command };
        if pushes.contains(&t) {
            obj_vel[0] += 0.1 * setup.object_push[0];
            obj_vel[1] += 0.1 * setup.object_push[1];
        }
        // damped drift back toward the centre line
        for a in 0..2 {
            obj_vel[a] += (-4.0 * obj_offset[a] - 2.0 * obj_vel[a]) * dt;
            obj_offset[a] += obj_vel[a] * dt;
        }
        torso[0] += cmd.vx * dt;
        torso[1] += cmd.vy * dt;

        let mut robot = RobotState::standing(cfg.reward.h_target);
        robot.q_default = cfg.action.q_default;
        robot.p_w = [torso[0], torso[1], cfg.reward.h_target];
        robot.v_r = [cmd.vx, cmd.vy, 0.0];
        robot.w_r = [0.0, 0.0, cmd.wz];
        let phase = (t as f64 * dt * std::f64::consts::TAU / 0.6).sin();
        let action: Joints = std::array::from_fn(|j| 0.2 * phase * if j % 3 == 1 { 1.0 } else { 0.5 });
        robot.q = std::array::from_fn(|j| {
            cfg.action.q_default[j] + cfg.action.alpha_action * action[j] + setup.robot.joint_offset[j]
        });
        robot.q_dot = setup.robot.joint_vel;
        for f in 0..4 {
            if contact.contact[f] {
                robot.foot_pos_w[f][2] = 0.02;
                robot.foot_vel_w[f] = [0.0; 3];
                robot.foot_force_w[f] = [0.0, 0.0, crate::GRAVITY * setup.robot.trunk_mass / 2.0];
            } else {
                robot.foot_pos_w[f][2] = 0.08;
                robot.foot_vel_w[f] = [2.0 * cmd.vx, 2.0 * cmd.vy, 0.0];
                robot.foot_force_w[f] = [0.0; 3];
            }
        }
        let object = ObjectState {
            p_r: [obj_offset[0], obj_offset[1], r + 0.02],
            v_r: [obj_vel[0], obj_vel[1], 0.0],
            theta_r: [0.0, 0.0, setup.init_yaw],
            w_r: [0.0; 3],
            p_w_xy: [torso[0] + obj_offset[0], torso[1] + obj_offset[1]],
        };
        rows.push(TrajectoryRow {
            timestamp,
            x: obj_offset[0],
            y: obj_offset[1],
            yaw: setup.init_yaw,
            dims: Some([r, setup.object.length, setup.object.mass]),
            reference: None,
            robot: Some(robot),
            object: Some(object),
            contacts: Some(*contact),
            command: Some(cmd),
            action: Some(action),
        });
    }
    (setup, Trajectory { rows })
}

/// Per-tick outputs of [`run_trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub frames: Vec<TactileFrame>,
    pub rewards: Vec<RewardRow>,
    /// Last flattened observation window.
    pub final_window: Vec<f64>,
}

/// Runs a trajectory through the complete per-tick pipeline: contact
/// model, signal path, observation window, gait tracking and rewards.
pub fn run_trajectory(cfg: &SimConfig, traj: &Trajectory, seed: u64) -> Result<PipelineOutput, ReplayError> {
    if !traj.has_robot_state() || !traj.has_contacts() {
        return Err(ReplayError::Schema("episode replay needs robot state and contact columns".into()));
    }
    let grid = &cfg.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7AC7_11E5);
    let mut pipe = SignalPipeline::new(&cfg.pipeline, grid.rows, grid.cols, &mut rng);
    let mut window = ObsWindow::new();
    let mut tracker = GaitTracker::new();
    let mut last_action = [0.0; 12];
    let mut last_cmd: Option<VelocityCommand> = None;
    let mut contacted = false;
    let default_dt = traj.dt().unwrap_or(1.0 / cfg.pipeline.sample_rate);

    let mut frames = Vec::with_capacity(traj.rows.len());
    let mut rewards = Vec::with_capacity(traj.rows.len());
    for (k, row) in traj.rows.iter().enumerate() {
        let pose = row.pose(cfg);
        let active = active_taxels(grid, &pose, &cfg.contact_model);
        contacted |= active.count_active() > 0;
        let force = force_from_active(&active, pose.mass);
        frames.push(pipe.step(&force, row.timestamp, &mut rng));

        let robot = row.robot.as_ref().expect("checked");
        let object = row.object.as_ref().expect("checked");
        let contacts = row.contacts.expect("checked");
        let cmd = row.command.unwrap_or_default();
        let action = row.action.unwrap_or([0.0; 12]);

        let raw = RawObservation {
            object_pos: object.p_r,
            object_euler: object.theta_r,
            object_linvel: object.v_r,
            object_angvel: object.w_r,
            gravity: projected_gravity(&robot.theta_w),
            base_angvel: robot.w_r,
            joint_pos: std::array::from_fn(|j| robot.q[j] - robot.q_default[j]),
            joint_vel: robot.q_dot,
            command: cmd.as_array(),
            last_action,
        };
        window.push(build_observation(&raw, &cfg.obs_noise, &mut rng, contacted));

        let dt = if k == 0 {
            default_dt
        } else {
            row.timestamp - traj.rows[k - 1].timestamp
        };
        let changed = last_cmd.is_some_and(|c| c != cmd);
        last_cmd = Some(cmd);
        let mut r = step_reward(cfg, &mut tracker, robot, object, &contacts, &cmd, &action, &last_action, dt, changed);
        r.timestamp = row.timestamp;
        last_action = action;
        let stop = r.termination.is_some();
        rewards.push(r);
        if stop {
            break;
        }
    }
    let flat = window.flatten();
    debug_assert_eq!(flat.len(), FLAT_DIM);
    Ok(PipelineOutput {
        frames,
        rewards,
        final_window: flat.to_vec(),
    })
}

/// Gravity direction in the body frame for roll/pitch/yaw angles.
pub fn projected_gravity(rpy: &Vec3) -> Vec3 {
    let (sr, cr) = rpy[0].sin_cos();
    let (sp, cp) = rpy[1].sin_cos();
    [sp, -sr * cp, -cr * cp]
}

/// Full synthetic pipeline for one seed.
pub fn run_episode(cfg: &SimConfig, seed: u64, ticks: usize) -> Result<EpisodeRun, ReplayError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (setup, trajectory) = scripted_trajectory(cfg, ticks, &mut rng);
    let PipelineOutput {
        frames,
        rewards,
        final_window,
    } = run_trajectory(cfg, &trajectory, rng.random())?;
    let contacts = trajectory.contacts().expect("scripted contacts");
    let dt = 1.0 / cfg.pipeline.sample_rate;
    let gait = gait_metrics(&contacts[..rewards.len()], dt);
    Ok(EpisodeRun {
        setup,
        trajectory,
        frames,
        rewards,
        gait,
        final_window,
    })
}

//! Speed-scaling scheduling game: energy-optimal schedules for deadline and
//! linear-penalty users, the proportional and X cost-sharing mechanisms, and
//! numerical audits of their incentive properties.

pub mod audit;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod model;
pub mod typea;
pub mod typeb;

pub use error::{Error, Result};
pub use model::{
    completion_times, energy, validate_instance, Alpha, Announcement, Block, Instance, JobA, JobB,
    Mechanism, MechanismOutcome, OrderMethod, ScheduleResult, SpeedProfile, UserType, Users,
};

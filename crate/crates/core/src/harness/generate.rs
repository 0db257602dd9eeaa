use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::instance_file::InstanceFile;
use crate::error::Result;
use crate::mechanisms::outcome;
use crate::model::{Instance, JobA, JobB, Mechanism, UserType};

/// Uniform draw from `(0, 1]`.
fn unit(rng: &mut impl Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Seeded random instance. Workloads, deadline gaps and penalties are uniform
/// on `(0, 1]`. Each `U` is set to the user's truthful cost (share plus, for
/// penalty users, `p * t`) plus one, so every truthful welfare equals one.
pub fn generate_instance(
    seed: u64,
    n: usize,
    user_type: UserType,
    alpha: f64,
) -> Result<InstanceFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance = match user_type {
        UserType::A => {
            let mut deadline = 0.0;
            let jobs = (1..=n as u32)
                .map(|id| {
                    let w = unit(&mut rng);
                    deadline += unit(&mut rng);
                    JobA {
                        id,
                        w,
                        d: deadline,
                        u: 1.0,
                    }
                })
                .collect();
            let mut inst = Instance::type_a(alpha, jobs)?;
            let out = outcome(&inst, &[], Mechanism::Proportional)?;
            if let crate::model::Users::A(jobs) = &mut inst.users {
                for (job, user) in jobs.iter_mut().zip(&out.users) {
                    job.u = user.share + 1.0;
                }
            }
            inst
        }
        UserType::B => {
            let jobs = (1..=n as u32)
                .map(|id| {
                    let w = unit(&mut rng);
                    let p = unit(&mut rng);
                    JobB { id, w, p, u: 1.0 }
                })
                .collect();
            let mut inst = Instance::type_b(alpha, jobs)?;
            let out = outcome(&inst, &[], Mechanism::X)?;
            if let crate::model::Users::B(jobs) = &mut inst.users {
                for (job, user) in jobs.iter_mut().zip(&out.users) {
                    let t = user.announced_time.expect("everyone participates");
                    job.u = job.p * t + user.share + 1.0;
                }
            }
            inst
        }
    };
    Ok(InstanceFile::from_instance(&instance, &[]))
}

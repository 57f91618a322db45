pub mod baselines;
pub mod collision;
pub mod grasp;
pub mod harness;
pub mod kinematics;
pub mod optimizer;
pub mod planner;

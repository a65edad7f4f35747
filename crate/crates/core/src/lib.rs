pub mod approx;
pub mod db;
pub mod enumerate;
pub mod error;
pub mod exact;
pub mod neighbourhood;
pub mod num;
pub mod params;
pub mod query;
pub mod splits;
pub mod suites;
pub mod testers;
pub mod workloads;

pub use db::{load_database, Database, Elem, Fragment, RelId, Relation, Schema};
pub use error::{Error, Result};

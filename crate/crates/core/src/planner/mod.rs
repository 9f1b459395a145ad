//! SQL front end, plan lowering and execution.

pub mod ast;
mod bind;
mod exec;
mod lexer;
mod parser;
mod physical;

pub use bind::{bind, bind_aggregate, bind_scalar, bind_sql, describe_call, Block, BoundFrom, LogicalPlan, Resolver};
pub use parser::{parse, parse_expr};
pub use exec::{execute, Executed, Grouped, Inputs, OpStat};
pub use physical::{lower, BlockPlan, NaiveStep, PhysicalPlan, PipeSink, PipeSpec, PlanNode, ProbeSpec, Strategy};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid node name {0:?}: names must be nonempty and contain no whitespace or commas")]
    InvalidName(String),

    #[error("graph contains a cycle: {}", .0.join("→"))]
    Cycle(Vec<String>),

    #[error("duplicate node {0}")]
    DuplicateNode(String),

    #[error("duplicate edge {0}→{1}")]
    DuplicateEdge(String, String),

    #[error("self-loop on {0}")]
    SelfLoop(String),

    #[error("edge {0}→{1} references an undeclared node")]
    UnknownEndpoint(String, String),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("cannot intervene on latent node {0}")]
    LatentIntervention(String),

    #[error("cannot condition on latent node {0}")]
    LatentConditioning(String),

    #[error("latent node {0} cannot appear in a criterion set")]
    LatentInCriterionSet(String),

    #[error("node sets overlap on {0}")]
    OverlappingSets(String),

    #[error("{0} must be nonempty")]
    EmptySet(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{rule} not applicable: {statement} does not hold")]
    RuleNotApplicable { rule: String, statement: String },

    #[error("bad site {0:?}: no atom at that location")]
    BadSite(Vec<usize>),

    #[error("front-door criterion not satisfied: {0}")]
    CriterionNotSatisfied(String),

    #[error("expression is not hat-free: {0}")]
    NotHatFree(String),

    #[error("no value bound for variable {0}")]
    UnboundVariable(String),

    #[error("conditioning on a zero-probability event: {0}")]
    ConditioningOnZero(String),

    #[error("positivity violation: {0} has zero probability")]
    PositivityViolation(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("CPT of {node} is not normalized in column {column} (sum {sum})")]
    NotNormalized { node: String, column: usize, sum: f64 },

    #[error("state {state} out of range for {node} (cardinality {cardinality})")]
    StateOutOfRange { node: String, state: usize, cardinality: usize },

    #[error("{0} variables exceeds the dense-table limit of {1}")]
    TooManyVariables(usize, usize),
}

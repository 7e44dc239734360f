use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("level {requested} exceeds stored depth {depth}")]
    DepthExceeded { requested: usize, depth: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("table at level {level} is not a bijection")]
    NotBijection { level: usize },
    #[error("letter {letter} out of range at level {level} (alphabet size {size})")]
    LetterOutOfRange { level: usize, letter: usize, size: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("unresolved reference `{0}`")]
    UnresolvedRef(String),
    #[error("duplicate definition of `{0}`")]
    DuplicateDefinition(String),
    #[error("non-contracting recursion: {0}")]
    NonContracting(String),
    #[error("tuple or permutation arity {found} does not match branching factor {expected}")]
    Arity { expected: usize, found: usize },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("element is not minimal at level {level}")]
    NotMinimal { level: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
    #[error("malformed document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, Error>;

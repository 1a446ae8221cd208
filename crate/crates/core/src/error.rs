use thiserror::Error;

/// Errors raised by the crystal, cropping, loss and metric kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate lattice: |det| = {0:.3e} A^3")]
    DegenerateLattice(f64),
    #[error("left-handed lattice: det = {0:.6}")]
    LeftHandedLattice(f64),
    #[error("invalid crystal: {0}")]
    InvalidCrystal(String),
    #[error("singular supercell matrix")]
    SingularSupercell,
    #[error("niggli divergence after {0} iterations")]
    NiggliDivergence(usize),
    #[error("rotation is not proper orthogonal (deviation {0:.3e})")]
    NotARotation(f64),
    #[error("empty molecule")]
    EmptyMolecule,
    #[error("invalid symop at byte {offset}: {message}")]
    SymopSyntax { offset: usize, message: String },
    #[error("invalid symop: {0}")]
    InvalidSymop(String),
    #[error("symmetry clash: {0}")]
    SymmetryClash(String),
    #[error("cif: {0}")]
    Cif(String),
    #[error("unknown element '{0}'")]
    UnknownElement(String),
    #[error("element {0} missing from radii table '{1}'")]
    MissingRadius(String, String),
    #[error("polymeric structure: {0}")]
    Polymeric(String),
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("oversized molecule: center has {tokens} tokens, budget is {budget}")]
    OversizedMolecule { tokens: usize, budget: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate alignment")]
    DegenerateAlignment,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("graphs are not isomorphic: {0}")]
    NotIsomorphic(String),
    #[error("no graph-compatible molecule in prediction")]
    NoCompatibleMolecule,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

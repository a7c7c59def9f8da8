use crate::qp::QpStatus;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inadmissible action at period {period}: {constraint}")]
    InadmissibleAction { period: usize, constraint: String },

    #[error("monomial covariance is singular for noise component {component}: {monomial} is an affine function of lower-order monomials")]
    SingularMoments { component: usize, monomial: String },

    #[error("singular matrix at period {period}: {what}")]
    Singular { period: usize, what: String },

    #[error("regression for period {period}, basis index {index} failed: {source}")]
    Regression {
        period: usize,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("problem is not convex: {0}")]
    NonConvex(String),

    #[error("penalty is not affine in the actions ({0}); use regressors that are affine in the action")]
    NotAffine(String),

    #[error("inner problem on path {path} terminated with status {status:?}")]
    InnerSolve { path: usize, status: QpStatus },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

use thiserror::Error;

/// Why a token did not authenticate. Each variant maps to its own wire code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("token is not known")]
    Invalid,
    #[error("token has expired")]
    Expired,
    #[error("token was already used")]
    Reused,
    #[error("no such principal: {0}")]
    UnknownPrincipal(String),
}

impl TokenError {
    pub fn code(&self) -> &'static str {
        match self {
            TokenError::Invalid | TokenError::UnknownPrincipal(_) => "token_invalid",
            TokenError::Expired => "token_expired",
            TokenError::Reused => "token_reused",
        }
    }
}

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("{detail}")]
    Invalid { field: Option<String>, detail: String },

    #[error("{0}")]
    BadRequest(String),

    #[error("{requested} perturbations requested, at most {max} per request")]
    OverBudget { requested: usize, max: usize },

    #[error("registry error: {0}")]
    Registry(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    detail: String,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownModel(_) => StatusCode::NOT_FOUND,
            ServiceError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::OverBudget { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ServiceError::Registry(_) | ServiceError::Internal(_) | ServiceError::Bind { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownModel(_) => "unknown_model",
            ServiceError::Invalid { .. } => "invalid_request",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::OverBudget { .. } => "over_budget",
            _ => "internal",
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, detail: impl Into<String>) -> Self {
        ServiceError::Invalid {
            field: Some(field.into()),
            detail: detail.into(),
        }
    }
}

impl From<mortrisk::Error> for ServiceError {
    fn from(e: mortrisk::Error) -> Self {
        use mortrisk::Error as E;
        match e {
            E::Field { ref field, .. } => ServiceError::invalid(field.clone(), e.to_string()),
            E::MissingValue { ref feature, .. } => ServiceError::invalid(feature.clone(), e.to_string()),
            E::TooManyPlayers { .. } => ServiceError::invalid("mode", e.to_string()),
            E::Domain(_) | E::Config(_) | E::Validation { .. } => ServiceError::Invalid {
                field: None,
                detail: e.to_string(),
            },
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code(),
            field: match &self {
                ServiceError::Invalid { field, .. } => field.as_deref(),
                _ => None,
            },
            detail: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

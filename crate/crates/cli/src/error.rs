use std::fmt;

/// Exit-code category of a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Input,
    Quality,
    Dependency,
    Divergence,
}

impl Category {
    pub fn code(self) -> u8 {
        match self {
            Category::Usage => 1,
            Category::Input => 2,
            Category::Quality => 3,
            Category::Dependency => 4,
            Category::Divergence => 5,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    /// Short label printed before the message, e.g. `input not found`.
    pub label: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, label: &'static str, message: impl Into<String>) -> Self {
        Self {
            category,
            label,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Category::Usage, "usage", message)
    }

    pub fn input(label: &'static str, message: impl Into<String>) -> Self {
        Self::new(Category::Input, label, message)
    }

    pub fn quality(message: impl Into<String>) -> Self {
        Self::new(Category::Quality, "quality threshold", message)
    }

    pub fn dependency(message: impl Into<String>) -> Self {
        Self::new(Category::Dependency, "missing dependency", message)
    }

    pub fn exit_code(&self) -> u8 {
        self.category.code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

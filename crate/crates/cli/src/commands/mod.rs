pub mod mc;
pub mod minimize;
pub mod train;
pub mod verify;

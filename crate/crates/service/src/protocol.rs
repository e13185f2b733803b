//! Wire protocol between the session host and its clients: one JSON object
//! per websocket text frame, tagged by `type` and carrying the protocol
//! version in `v`. See `docs/protocol.md`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use twistarm::kinematics::Pose;
use twistarm::teleop::MasterCommand;

use crate::session::StateSnapshot;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Operator,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    /// Restart the session from the scenario's initial world.
    Reset,
    /// Start (`enabled: true`) or stop recording. Starting resets the world
    /// so the recorded trace replays from the beginning.
    Record,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Command {
        v: u32,
        position: [f64; 3],
        /// w, x, y, z
        orientation: [f64; 4],
        gripper: f64,
        clutch: bool,
    },
    Control {
        v: u32,
        action: ControlAction,
        #[serde(default)]
        enabled: Option<bool>,
    },
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome { v: u32, role: Role },
    Snapshot(Box<StateSnapshot>),
    Error { v: u32, message: String },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            v: PROTOCOL_VERSION,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("invalid command: {0}")]
    Invalid(String),
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        let v = match &msg {
            ClientMessage::Command { v, .. } | ClientMessage::Control { v, .. } => *v,
        };
        if v != PROTOCOL_VERSION {
            return Err(ProtocolError::Version(v));
        }
        Ok(msg)
    }

    pub fn command(cmd: &MasterCommand) -> Self {
        let q = cmd.pose.orientation.quaternion();
        ClientMessage::Command {
            v: PROTOCOL_VERSION,
            position: cmd.pose.position.into(),
            orientation: [q.w, q.i, q.j, q.k],
            gripper: cmd.gripper,
            clutch: cmd.clutch,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}

/// Builds the master command a `command` message stands for; the tick is
/// assigned by the session when the command is applied.
pub fn master_command(
    position: [f64; 3],
    orientation: [f64; 4],
    gripper: f64,
    clutch: bool,
    tick: u64,
) -> Result<MasterCommand, ProtocolError> {
    if position.iter().chain(&orientation).chain([&gripper]).any(|v| !v.is_finite()) {
        return Err(ProtocolError::Invalid("non-finite value".into()));
    }
    if !(0.0..=1.0).contains(&gripper) {
        return Err(ProtocolError::Invalid(format!("gripper {gripper} outside [0, 1]")));
    }
    let q = Quaternion::new(orientation[0], orientation[1], orientation[2], orientation[3]);
    if (q.norm() - 1.0).abs() > 1e-6 {
        return Err(ProtocolError::Invalid(format!("orientation norm {} is not 1", q.norm())));
    }
    Ok(MasterCommand {
        tick,
        pose: Pose::new(Vector3::from(position), UnitQuaternion::new_unchecked(q)),
        gripper,
        clutch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_round_trip() {
        let text = r#"{"type":"command","v":1,"position":[0.1,0.2,0.3],"orientation":[1,0,0,0],"gripper":0.0,"clutch":true}"#;
        let msg = ClientMessage::parse(text).unwrap();
        let ClientMessage::Command { position, orientation, gripper, clutch, .. } = msg.clone() else {
            panic!("expected a command");
        };
        let cmd = master_command(position, orientation, gripper, clutch, 4).unwrap();
        assert_eq!(ClientMessage::command(&cmd), msg);
    }

    #[test]
    fn rejects_bad_messages() {
        assert!(matches!(ClientMessage::parse("not json"), Err(ProtocolError::Malformed(_))));
        assert!(matches!(
            ClientMessage::parse(r#"{"type":"control","v":2,"action":"reset"}"#),
            Err(ProtocolError::Version(2))
        ));
        assert!(matches!(
            ClientMessage::parse(r#"{"type":"control","v":1,"action":"reset","extra":1}"#),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(master_command([0.0; 3], [2.0, 0.0, 0.0, 0.0], 0.0, true, 1).is_err());
        assert!(master_command([0.0; 3], [1.0, 0.0, 0.0, 0.0], 1.5, true, 1).is_err());
    }

    #[test]
    fn control_messages() {
        let msg = ClientMessage::parse(r#"{"type":"control","v":1,"action":"record","enabled":true}"#).unwrap();
        assert_eq!(
            msg,
            ClientMessage::Control {
                v: 1,
                action: ControlAction::Record,
                enabled: Some(true)
            }
        );
    }

    #[test]
    fn error_frame_shape() {
        let json: serde_json::Value = serde_json::from_str(&ServerMessage::error("nope").to_json()).unwrap();
        assert_eq!(json["type"], "error");
        assert_eq!(json["v"], 1);
        assert_eq!(json["message"], "nope");
    }
}

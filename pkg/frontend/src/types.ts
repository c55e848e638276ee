// Shapes of the session service's JSON payloads.

export interface Vec3 extends Array<number> {}

export interface ArmSegment {
  p0: Vec3;
  p1: Vec3;
  radius: number;
}

export interface SceneObject {
  id: number;
  kind: string;
  position: Vec3;
  orientation: number[];
  half_extents: Vec3;
  color: string;
}

export interface CostTermPayload {
  kind: string;
  weight: number;
  params: Record<string, number[] | number>;
}

export interface BreakdownTerm {
  kind: string;
  raw: number;
  weighted: number;
}

export interface GroundingNode {
  id: number;
  text: string;
  pos_tag: string;
  children: number[];
  grounding: string;
}

export interface StatePayload {
  session: number;
  status: string;
  exec_clock: number;
  sim_time: number;
  robot_state: { q: number[]; dq: number[]; ee_position: Vec3 };
  arm_segments: ArmSegment[];
  environment: { objects: SceneObject[]; obstacles: number[] };
  ee_path: Vec3[];
  problem: { terms: CostTermPayload[] } | null;
  cost_breakdown: { terms: BreakdownTerm[]; total: number } | null;
  grounding_tree: GroundingNode[] | null;
  episodes: { commands: string[]; success: boolean; duration: number; smoothness: number }[];
}

export interface CommandResponse {
  groundings: GroundingNode[];
  logscore: number;
  problem: { terms: CostTermPayload[] };
  trajectory: unknown;
}

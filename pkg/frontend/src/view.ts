// Pure payload-to-drawing transforms. Everything rendered is computed
// here from the server state alone, so the logic is testable without a
// canvas and the client never invents geometry.

import type { CostTermPayload, GroundingNode, StatePayload } from "./types.js";

export interface Viewport {
  width: number;
  height: number;
}

// world windows for the two projections (meters)
export const TOP_WINDOW = { x: [-0.25, 1.35], y: [-0.85, 0.85] } as const;
export const SIDE_WINDOW = { x: [-0.25, 1.35], z: [-0.05, 1.75] } as const;

export type View = "top" | "side";

export function project(p: number[], view: View, vp: Viewport): [number, number] {
  if (view === "top") {
    const u = (p[0] - TOP_WINDOW.x[0]) / (TOP_WINDOW.x[1] - TOP_WINDOW.x[0]);
    const v = (p[1] - TOP_WINDOW.y[0]) / (TOP_WINDOW.y[1] - TOP_WINDOW.y[0]);
    return [u * vp.width, (1 - v) * vp.height];
  }
  const u = (p[0] - SIDE_WINDOW.x[0]) / (SIDE_WINDOW.x[1] - SIDE_WINDOW.x[0]);
  const v = (p[2] - SIDE_WINDOW.z[0]) / (SIDE_WINDOW.z[1] - SIDE_WINDOW.z[0]);
  return [u * vp.width, (1 - v) * vp.height];
}

export function metersToPixels(m: number, view: View, vp: Viewport): number {
  const span = view === "top" ? TOP_WINDOW.x[1] - TOP_WINDOW.x[0] : SIDE_WINDOW.x[1] - SIDE_WINDOW.x[0];
  return (m / span) * vp.width;
}

export interface Shape {
  kind: "segment" | "polyline" | "rect" | "disc" | "marker";
  points: [number, number][];
  radiusPx?: number;
  stroke?: string;
  fill?: string;
  width?: number;
  label?: string;
}

const OBJECT_COLORS: Record<string, string> = {
  red: "#d64545",
  blue: "#3b6fd6",
  green: "#3d9950",
  none: "#8a8a8a",
};

export function repulsionSources(state: StatePayload): { source: number[]; c: number; weight: number }[] {
  const terms = state.problem?.terms ?? [];
  return terms
    .filter((t) => t.kind === "repulsion")
    .map((t) => ({
      source: t.params["source"] as number[],
      c: t.params["c"] as number,
      weight: t.weight,
    }));
}

export function positionTarget(state: StatePayload): number[] | null {
  const t = (state.problem?.terms ?? []).find((t) => t.kind === "position");
  return t ? (t.params["target"] as number[]) : null;
}

// shaded disc radius proportional to the repulsion falloff length 1/c
export function repulsionRadiusMeters(c: number): number {
  return 1.0 / Math.max(c, 1e-6);
}

export function buildShapes(state: StatePayload, view: View, vp: Viewport): Shape[] {
  const shapes: Shape[] = [];
  for (const o of state.environment.objects) {
    const [cx, cy] = project(o.position, view, vp);
    const hx = metersToPixels(o.half_extents[0], view, vp);
    const hv = metersToPixels(view === "top" ? o.half_extents[1] : o.half_extents[2], view, vp);
    shapes.push({
      kind: "rect",
      points: [
        [cx - hx, cy - hv],
        [cx + hx, cy + hv],
      ],
      fill: OBJECT_COLORS[o.color] ?? OBJECT_COLORS.none,
      label: o.kind,
    });
  }
  for (const r of repulsionSources(state)) {
    shapes.push({
      kind: "disc",
      points: [project(r.source, view, vp)],
      radiusPx: metersToPixels(repulsionRadiusMeters(r.c), view, vp),
      fill: "rgba(214, 69, 69, 0.25)",
      stroke: "#d64545",
      label: "repulsion",
    });
  }
  const target = positionTarget(state);
  if (target) {
    shapes.push({ kind: "marker", points: [project(target, view, vp)], stroke: "#3d9950", label: "target" });
  }
  if (state.ee_path.length > 1) {
    shapes.push({
      kind: "polyline",
      points: state.ee_path.map((p) => project(p, view, vp)),
      stroke: "#2b2b2b",
      width: 2,
      label: "ee-path",
    });
  }
  for (const seg of state.arm_segments) {
    shapes.push({
      kind: "segment",
      points: [project(seg.p0, view, vp), project(seg.p1, view, vp)],
      stroke: "#7a5ec7",
      width: Math.max(2, metersToPixels(seg.radius * 2, view, vp)),
      label: "link",
    });
  }
  shapes.push({
    kind: "marker",
    points: [project(state.robot_state.ee_position, view, vp)],
    stroke: "#e08e2b",
    label: "exec-marker",
  });
  return shapes;
}

export interface TermDiff {
  added: string[];
  removed: string[];
  changed: string[];
}

const termKey = (t: CostTermPayload) => `${t.kind}${t.kind === "repulsion" ? ":" + JSON.stringify(t.params["source"]) : ""}`;

export function diffTerms(prev: CostTermPayload[] | null, next: CostTermPayload[]): TermDiff {
  const before = new Map((prev ?? []).map((t) => [termKey(t), t]));
  const after = new Map(next.map((t) => [termKey(t), t]));
  const added: string[] = [];
  const removed: string[] = [];
  const changed: string[] = [];
  for (const [k, t] of after) {
    if (!before.has(k)) added.push(t.kind);
    else if (JSON.stringify(before.get(k)) !== JSON.stringify(t)) changed.push(t.kind);
  }
  for (const [k, t] of before) {
    if (!after.has(k)) removed.push(t.kind);
  }
  return { added, removed, changed };
}

export function groundingTreeLines(nodes: GroundingNode[] | null): string[] {
  if (!nodes || nodes.length === 0) return [];
  const byId = new Map(nodes.map((n) => [n.id, n]));
  const root = nodes.find((n) => !nodes.some((m) => m.children.includes(n.id)));
  const lines: string[] = [];
  const walk = (id: number, depth: number) => {
    const n = byId.get(id);
    if (!n) return;
    lines.push(`${"  ".repeat(depth)}${n.text} [${n.pos_tag}] -> ${n.grounding}`);
    for (const c of n.children) walk(c, depth + 1);
  };
  if (root) walk(root.id, 0);
  return lines;
}

export function costBars(state: StatePayload): { kind: string; weighted: number; frac: number }[] {
  const bd = state.cost_breakdown;
  if (!bd || bd.terms.length === 0) return [];
  const max = Math.max(...bd.terms.map((t) => t.weighted), 1e-9);
  return bd.terms.map((t) => ({ kind: t.kind, weighted: t.weighted, frac: t.weighted / max }));
}

export function statusBadge(state: StatePayload): { text: string; color: string } {
  const colors: Record<string, string> = {
    idle: "#3d9950",
    executing: "#e08e2b",
    stopped: "#d64545",
    failed: "#7a1f1f",
  };
  return { text: state.status, color: colors[state.status] ?? "#555" };
}

export function polylineChanged(prev: number[][] | null, next: number[][], tol = 1e-9): boolean {
  if (!prev || prev.length !== next.length) return true;
  for (let i = 0; i < next.length; i++) {
    for (let k = 0; k < 3; k++) {
      if (Math.abs(prev[i][k] - next[i][k]) > tol) return true;
    }
  }
  return false;
}

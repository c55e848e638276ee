import { describe, expect, it } from "vitest";

import type { CostTermPayload, StatePayload } from "../src/types.js";
import {
  buildShapes,
  costBars,
  diffTerms,
  groundingTreeLines,
  polylineChanged,
  project,
  repulsionRadiusMeters,
  repulsionSources,
  statusBadge,
} from "../src/view.js";

const VP = { width: 480, height: 480 };

function makeState(overrides: Partial<StatePayload> = {}): StatePayload {
  return {
    session: 1,
    status: "executing",
    exec_clock: 1.2,
    sim_time: 4.0,
    robot_state: { q: [0, 0, 0], dq: [0, 0, 0], ee_position: [0.5, 0, 0.9] },
    arm_segments: [{ p0: [0, 0, 0.7], p1: [0.4, 0, 1.0], radius: 0.03 }],
    environment: {
      objects: [
        { id: 10, kind: "table", position: [0.72, 0, 0.325], orientation: [1, 0, 0, 0], half_extents: [0.42, 0.5, 0.325], color: "none" },
        { id: 7, kind: "block", position: [0.5, 0, 0.7], orientation: [1, 0, 0, 0], half_extents: [0.035, 0.035, 0.05], color: "green" },
      ],
      obstacles: [10],
    },
    ee_path: [
      [0.4, 0, 0.95],
      [0.5, 0, 0.9],
      [0.6, 0, 0.75],
    ],
    problem: {
      terms: [
        { kind: "collision", weight: 1, params: {} },
        { kind: "position", weight: 10, params: { target: [0.6, 0, 0.7] } },
      ],
    },
    cost_breakdown: {
      terms: [
        { kind: "collision", raw: 0.0, weighted: 0.0 },
        { kind: "position", raw: 0.12, weighted: 1.2 },
      ],
      total: 1.2,
    },
    grounding_tree: [
      { id: 1, text: "put", pos_tag: "VB", children: [2], grounding: "Command(place)" },
      { id: 2, text: "the cube", pos_tag: "NP", children: [], grounding: "ObjectRef(7)" },
    ],
    episodes: [],
    ...overrides,
  };
}

describe("projection", () => {
  it("maps world points into the viewport, y up", () => {
    const [x0, y0] = project([0, 0, 0], "top", VP);
    const [x1, y1] = project([0.5, 0.4, 0], "top", VP);
    expect(x1).toBeGreaterThan(x0);
    expect(y1).toBeLessThan(y0); // larger y draws higher on screen
  });

  it("side view uses z", () => {
    const [, low] = project([0.5, 0, 0.2], "side", VP);
    const [, high] = project([0.5, 0, 1.2], "side", VP);
    expect(high).toBeLessThan(low);
  });
});

describe("scene shapes", () => {
  it("renders objects, path, links, and the exec marker", () => {
    const shapes = buildShapes(makeState(), "top", VP);
    const kinds = shapes.map((s) => s.label);
    expect(kinds).toContain("ee-path");
    expect(kinds).toContain("link");
    expect(kinds).toContain("exec-marker");
    expect(shapes.filter((s) => s.kind === "rect").length).toBe(2);
  });

  it("adds a repulsion disc with radius proportional to 1/c", () => {
    const state = makeState({
      problem: {
        terms: [
          { kind: "position", weight: 10, params: { target: [0.6, 0, 0.7] } },
          { kind: "repulsion", weight: 3, params: { source: [0.55, 0, 0.7], c: 10 } },
        ],
      },
    });
    const discs = buildShapes(state, "side", VP).filter((s) => s.label === "repulsion");
    expect(discs.length).toBe(1);
    expect(repulsionRadiusMeters(10)).toBeCloseTo(0.1);
    expect(repulsionRadiusMeters(20)).toBeCloseTo(0.05);
    expect(repulsionSources(state).length).toBe(1);
  });

  it("renders no repulsion glyph when the problem has none", () => {
    const discs = buildShapes(makeState(), "top", VP).filter((s) => s.label === "repulsion");
    expect(discs.length).toBe(0);
  });
});

describe("term diff", () => {
  const base: CostTermPayload[] = [
    { kind: "collision", weight: 1, params: {} },
    { kind: "position", weight: 10, params: { target: [0.6, 0, 0.7] } },
  ];

  it("reports added repulsion terms", () => {
    const next = [...base, { kind: "repulsion", weight: 3, params: { source: [0.5, 0, 0.7], c: 10 } }];
    const d = diffTerms(base, next);
    expect(d.added).toEqual(["repulsion"]);
    expect(d.removed).toEqual([]);
  });

  it("reports removed and changed terms", () => {
    const next = [{ kind: "position", weight: 10, params: { target: [0.2, 0, 0.7] } }];
    const d = diffTerms(base, next);
    expect(d.removed).toContain("collision");
    expect(d.changed).toContain("position");
  });

  it("handles a first command with no previous terms", () => {
    const d = diffTerms(null, base);
    expect(d.added.sort()).toEqual(["collision", "position"]);
  });
});

describe("panels", () => {
  it("formats the grounding tree with indentation", () => {
    const lines = groundingTreeLines(makeState().grounding_tree);
    expect(lines[0]).toContain("put");
    expect(lines[1].startsWith("  ")).toBe(true);
    expect(lines[1]).toContain("ObjectRef(7)");
  });

  it("cost bars are normalized to the largest term", () => {
    const bars = costBars(makeState());
    expect(Math.max(...bars.map((b) => b.frac))).toBeCloseTo(1.0);
  });

  it("status badge tracks the payload only", () => {
    expect(statusBadge(makeState()).text).toBe("executing");
    expect(statusBadge(makeState({ status: "stopped" })).text).toBe("stopped");
  });

  it("polyline change detection", () => {
    const a = [
      [0, 0, 0],
      [1, 0, 0],
    ];
    expect(polylineChanged(a, a.map((p) => [...p]))).toBe(false);
    expect(polylineChanged(a, [
      [0, 0, 0],
      [1, 0, 0.2],
    ])).toBe(true);
  });
});

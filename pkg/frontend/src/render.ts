// Canvas painting of the shape lists produced by view.ts.

import type { Shape } from "./view.js";

export function paint(ctx: CanvasRenderingContext2D, shapes: Shape[], width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, width, height);
  for (const s of shapes) {
    switch (s.kind) {
      case "rect": {
        const [[x0, y0], [x1, y1]] = s.points;
        ctx.fillStyle = s.fill ?? "#999";
        ctx.globalAlpha = 0.85;
        ctx.fillRect(Math.min(x0, x1), Math.min(y0, y1), Math.abs(x1 - x0), Math.abs(y1 - y0));
        ctx.globalAlpha = 1.0;
        break;
      }
      case "disc": {
        const [[x, y]] = s.points;
        ctx.beginPath();
        ctx.arc(x, y, s.radiusPx ?? 5, 0, 2 * Math.PI);
        if (s.fill) {
          ctx.fillStyle = s.fill;
          ctx.fill();
        }
        if (s.stroke) {
          ctx.strokeStyle = s.stroke;
          ctx.lineWidth = 1.5;
          ctx.stroke();
        }
        break;
      }
      case "segment":
      case "polyline": {
        ctx.beginPath();
        ctx.moveTo(s.points[0][0], s.points[0][1]);
        for (const [x, y] of s.points.slice(1)) ctx.lineTo(x, y);
        ctx.strokeStyle = s.stroke ?? "#333";
        ctx.lineWidth = s.width ?? 1.5;
        ctx.lineCap = "round";
        ctx.stroke();
        break;
      }
      case "marker": {
        const [[x, y]] = s.points;
        ctx.beginPath();
        ctx.arc(x, y, 5, 0, 2 * Math.PI);
        ctx.strokeStyle = s.stroke ?? "#000";
        ctx.lineWidth = 2;
        ctx.stroke();
        ctx.beginPath();
        ctx.moveTo(x - 8, y);
        ctx.lineTo(x + 8, y);
        ctx.moveTo(x, y - 8);
        ctx.lineTo(x, y + 8);
        ctx.stroke();
        break;
      }
    }
  }
}

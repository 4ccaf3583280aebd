/** Typed client for the calibration service. All geometry lives server-side. */

export interface Point {
  x: number;
  y: number;
}

export interface DiagnosticsBlock {
  average_error_px: number;
  accumulated_error_px: number;
  per_point_errors_px: number[];
  keypoint_count: number;
}

export type DiagnosticsPayload =
  | { status: "pending"; count: number }
  | { status: "degenerate"; count: number; detail: string }
  | {
      status: "ok";
      count: number;
      reprojection: DiagnosticsBlock;
      leave_one_out: DiagnosticsBlock | null;
    };

export interface SessionPair {
  camera: [number, number];
  twin: [number, number];
  label: string;
}

export interface SessionPayload {
  session_id: string;
  camera_path: string;
  twin_path: string;
  image_size_camera: [number, number];
  image_size_twin: [number, number];
  pairs: SessionPair[];
  diagnostics: DiagnosticsPayload;
}

export interface CurveEntry extends DiagnosticsBlock {
  k: number;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: unknown };
        if (parsed.detail !== undefined) {
          detail = typeof parsed.detail === "string"
            ? parsed.detail
            : JSON.stringify(parsed.detail);
        }
      } catch {
        // keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  startSession(cameraPath: string, twinPath: string): Promise<SessionPayload> {
    return this.request("POST", "/session", {
      camera_path: cameraPath,
      twin_path: twinPath,
    });
  }

  getSession(): Promise<SessionPayload> {
    return this.request("GET", "/session");
  }

  addKeypoint(camera: Point, twin: Point, label: string): Promise<DiagnosticsPayload> {
    return this.request("POST", "/keypoints", {
      camera: [camera.x, camera.y],
      twin: [twin.x, twin.y],
      label,
    });
  }

  removeKeypoint(index: number): Promise<DiagnosticsPayload> {
    return this.request("DELETE", `/keypoints/${index}`);
  }

  diagnostics(): Promise<DiagnosticsPayload> {
    return this.request("GET", "/diagnostics");
  }

  errorCurve(): Promise<{ entries: CurveEntry[] }> {
    return this.request("GET", "/error-curve");
  }

  exportKeypoints(path: string): Promise<{ path: string }> {
    return this.request("POST", "/export", { path });
  }

  imageUrl(which: "camera" | "twin"): string {
    return `${this.baseUrl}/image/${which}`;
  }
}

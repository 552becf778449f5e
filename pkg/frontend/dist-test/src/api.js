/** Typed client for the annotation service wire protocol. */
export class ApiError extends Error {
    status;
    code;
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
    }
}
async function parseError(response) {
    let code = "error";
    let message = `${response.status}`;
    try {
        const body = (await response.json());
        code = body.error ?? code;
        message = body.message ?? message;
    }
    catch {
        // non-JSON error body; keep defaults
    }
    return new ApiError(response.status, code, message);
}
export class HttpApi {
    baseUrl;
    fetchFn;
    constructor(baseUrl, fetchFn = fetch) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
    }
    url(path) {
        return this.baseUrl.replace(/\/$/, "") + path;
    }
    async post(path, body) {
        return this.fetchFn(this.url(path), {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
    }
    async qualificationStatus(annotatorId) {
        const response = await this.post("/annotators", { id: annotatorId });
        if (response.status === 404)
            return null;
        if (!response.ok)
            throw await parseError(response);
        return (await response.json());
    }
    async qualificationPairs() {
        const response = await this.fetchFn(this.url("/qualification"));
        if (!response.ok)
            throw await parseError(response);
        const body = (await response.json());
        return body.pairs;
    }
    async qualify(annotatorId, answers) {
        const response = await this.post("/annotators", { id: annotatorId, answers });
        if (!response.ok)
            throw await parseError(response);
        return (await response.json());
    }
    async nextTask(annotatorId) {
        const response = await this.fetchFn(this.url(`/tasks/next?annotator=${encodeURIComponent(annotatorId)}`));
        if (response.status === 204)
            return null;
        if (!response.ok)
            throw await parseError(response);
        return (await response.json());
    }
    async submitVote(payload) {
        const response = await this.post("/votes", payload);
        if (response.status !== 201)
            throw await parseError(response);
    }
    async progress() {
        const response = await this.fetchFn(this.url("/progress"));
        if (!response.ok)
            throw await parseError(response);
        return (await response.json());
    }
}
//# sourceMappingURL=api.js.map
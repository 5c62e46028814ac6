import os

from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP

from lab_tools import register_lab_tools

load_dotenv()

mcp = FastMCP("ots-lab")

register_lab_tools(mcp)

if __name__ == "__main__":
    mcp.run(transport=os.environ.get("MCP_TRANSPORT", "stdio"))

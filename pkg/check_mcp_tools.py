#!/usr/bin/env python3
"""
检查MCP服务器注册的工具
"""

import asyncio
import sys
import os

# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from recsim_mcp_server import mcp

EXPECTED_TOOLS = {
    "sample_and_encode",
    "decode_sample",
    "divergence_summary",
    "run_awgn_benchmark",
    "run_fixedkl_benchmark",
    "run_divergence_benchmark",
    "run_validation_suite",
}


async def check_mcp_tools():
    """检查MCP服务器注册的工具"""
    try:
        tools = await mcp.list_tools()
        print(f"✅ MCP服务器启动成功！", file=sys.__stdout__)
        print(f"📊 已注册工具数量: {len(tools)}", file=sys.__stdout__)
        print(f"\n🛠️ 已注册的工具列表:", file=sys.__stdout__)

        for i, tool in enumerate(tools, 1):
            tool_name = tool.name if hasattr(tool, 'name') else 'Unknown'
            description = tool.description if hasattr(tool, 'description') else '无描述'
            description = description or '无描述'  # 处理None值
            # 截取描述的前50个字符
            short_desc = description[:50] + "..." if len(description) > 50 else description
            print(f"   {i:2d}. {tool_name} - {short_desc}", file=sys.__stdout__)

        missing = EXPECTED_TOOLS - {t.name for t in tools}
        if missing:
            print(f"❌ 缺少工具: {', '.join(sorted(missing))}", file=sys.__stdout__)
            return False
        return True

    except Exception as e:
        print(f"❌ 检查MCP工具时出错: {str(e)}", file=sys.__stdout__)
        import traceback
        traceback.print_exc()
        return False


if __name__ == "__main__":
    sys.exit(0 if asyncio.run(check_mcp_tools()) else 1)

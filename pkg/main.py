def main():
    print(
r'''
                                 _
   _ __  ___   ___  ___  (_) _ __ ___
  | '__|/ _ \ / __|/ __| | || '_ ` _ \
  | |  |  __/| (__ \__ \ | || | | | | |
  |_|   \___| \___||___/ |_||_| |_| |_|
''')
    print("")
    print("欢迎来到 recsim!")
    print("Hello from recsim!")
    print("")
    print("这个项目实现相对熵编码（信道模拟）的采样器、编码器与数值实验。")
    print("This project implements relative entropy coding samplers, codes and experiments.")
    print("")
    print("命令行入口为 `recsim`，MCP 服务器为 recsim_mcp_server.py。")
    print("The CLI entry point is `recsim`; the MCP server is recsim_mcp_server.py.")
    print("")
    print("有关更多信息，请参阅 README.md 文件。")
    print("For more information, please refer to the README.md file.")
    print("")

if __name__ == "__main__":
    main()
